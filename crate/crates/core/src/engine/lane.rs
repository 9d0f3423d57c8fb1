//! Lane storage.
//!
//! A lane only ever holds a run of consecutive flits of its owner packet, so
//! its contents are stored as `(head_seq, len)` rather than as flit objects.

use std::ops::Range;

use rand::Rng;

use crate::config::LaneSelection;

pub(crate) const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Lane {
    /// Packet slot owning this lane, or `NONE`.
    pub(crate) owner: u32,
    pub(crate) head_seq: u32,
    pub(crate) len: u32,
    /// Lane reserved downstream by this worm's header, `NONE` until the header leaves.
    pub(crate) next: u32,
    /// Output port the owning worm takes out of this SE.
    pub(crate) out_port: u8,
    /// `cycle + 1` of the last cycle in which the head flit was granted.
    pub(crate) departed_at: u64,
}

impl Default for Lane {
    fn default() -> Self {
        Lane {
            owner: NONE,
            head_seq: 0,
            len: 0,
            next: NONE,
            out_port: 0,
            departed_at: 0,
        }
    }
}

impl Lane {
    pub fn is_free(&self) -> bool {
        self.owner == NONE
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Sequence numbers currently stored, front to back.
    pub fn seqs(&self) -> Range<u32> {
        self.head_seq..self.head_seq + self.len
    }

    pub(crate) fn claim(&mut self, owner: u32, out_port: u8) {
        debug_assert!(self.is_free() && self.len == 0);
        self.owner = owner;
        self.head_seq = 0;
        self.len = 0;
        self.next = NONE;
        self.out_port = out_port;
    }

    pub(crate) fn release(&mut self) {
        self.owner = NONE;
        self.next = NONE;
        self.head_seq = 0;
    }

    /// Flits that will still be resident after this cycle's departure, if any.
    #[inline]
    pub(crate) fn occupancy_after_departure(&self, cycle: u64) -> u32 {
        if self.departed_at == cycle + 1 {
            self.len - 1
        } else {
            self.len
        }
    }
}

/// Picks a free lane in `lanes` for a new header.
///
/// Returns the lane index, or `None` when every lane is owned (the header is
/// blocked). `cursor` is the buffer's round-robin pointer.
pub fn allocate_lane<R: Rng + ?Sized>(
    lanes: &[Lane],
    policy: LaneSelection,
    cursor: &mut u32,
    rng: &mut R,
) -> Option<usize> {
    match policy {
        LaneSelection::LowestFree => lanes.iter().position(Lane::is_free),
        LaneSelection::RoundRobin => {
            let n = lanes.len();
            let start = *cursor as usize % n;
            let found = (0..n).map(|i| (start + i) % n).find(|&i| lanes[i].is_free())?;
            *cursor = ((found + 1) % n) as u32;
            Some(found)
        }
        LaneSelection::Random => {
            let free = lanes.iter().filter(|l| l.is_free()).count();
            match free {
                0 => None,
                1 => lanes.iter().position(Lane::is_free),
                _ => {
                    let pick = rng.gen_range(0..free);
                    lanes
                        .iter()
                        .enumerate()
                        .filter(|(_, l)| l.is_free())
                        .nth(pick)
                        .map(|(i, _)| i)
                }
            }
        }
    }
}
