//! Stand-alone wormhole model with one monolithic FIFO per switch input,
//! written without the engine's data structures. Used as an oracle for the
//! single-lane configuration.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
struct Flit {
    packet: usize,
    seq: u32,
}

#[derive(Debug, Clone, Default)]
struct Buffer {
    fifo: VecDeque<Flit>,
    owner: Option<usize>,
    departing: bool,
}

#[derive(Debug, Clone)]
struct Pkt {
    destination: usize,
    generated: u64,
}

pub struct Reference {
    stages: usize,
    ports: usize,
    capacity: usize,
    n_flits: u32,
    /// `buffers[stage][link]`: the FIFO at the switch input fed by `link`.
    buffers: Vec<Vec<Buffer>>,
    queues: Vec<VecDeque<usize>>,
    /// Packet being fed into the fabric by each source, with its next flit.
    feeding: Vec<Option<(usize, u32)>>,
    packets: Vec<Pkt>,
    arrivals: Vec<(u64, usize, usize)>,
    next_arrival: usize,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivered {
    pub packet: usize,
    pub generated: u64,
    pub delivered: u64,
}

impl Reference {
    pub fn new(stages: usize, capacity: usize, n_flits: u32, mut arrivals: Vec<(u64, usize, usize)>, rng: ChaCha8Rng) -> Self {
        let ports = 1 << stages;
        arrivals.sort_by_key(|a| a.0);
        Reference {
            stages,
            ports,
            capacity,
            n_flits,
            buffers: vec![vec![Buffer::default(); ports]; stages],
            queues: vec![VecDeque::new(); ports],
            feeding: vec![None; ports],
            packets: Vec::new(),
            arrivals,
            next_arrival: 0,
            rng,
        }
    }

    /// Bit of the link address that stage `stage` switches on.
    fn bit(&self, stage: usize) -> usize {
        self.stages - 1 - stage
    }

    fn exit_link(&self, stage: usize, link: usize, port: usize) -> usize {
        let b = self.bit(stage);
        (link & !(1 << b)) | (port << b)
    }

    fn wanted_port(&self, stage: usize, packet: usize) -> usize {
        (self.packets[packet].destination >> self.bit(stage)) & 1
    }

    fn room_after_departures(&self, stage: usize, link: usize) -> bool {
        let b = &self.buffers[stage][link];
        b.fifo.len() - usize::from(b.departing) < self.capacity
    }

    /// Runs until every arrival is delivered or `limit` cycles pass.
    pub fn run(mut self, limit: u64) -> Vec<Delivered> {
        let mut out = Vec::new();
        let mut in_flight = 0usize;
        for cycle in 0..limit {
            while let Some(&(at, src, dst)) = self.arrivals.get(self.next_arrival) {
                if at > cycle {
                    break;
                }
                self.packets.push(Pkt { destination: dst, generated: cycle });
                self.queues[src].push_back(self.packets.len() - 1);
                self.next_arrival += 1;
                in_flight += 1;
            }
            if self.next_arrival == self.arrivals.len() && in_flight == 0 {
                break;
            }

            // (from stage, from link, to stage or sink, to link)
            let mut moves: Vec<(usize, usize, usize)> = Vec::new();
            for row in &mut self.buffers {
                for b in row.iter_mut() {
                    b.departing = false;
                }
            }
            for stage in (0..self.stages).rev() {
                let b = self.bit(stage);
                for se in 0..self.ports / 2 {
                    let high = (se >> b) << (b + 1);
                    let low = se & ((1 << b) - 1);
                    let inputs = [high | low, high | (1 << b) | low];
                    for port in 0..2 {
                        let mut cands = Vec::new();
                        for &link in &inputs {
                            let Some(head) = self.buffers[stage][link].fifo.front().copied() else { continue };
                            if self.wanted_port(stage, head.packet) != port {
                                continue;
                            }
                            let ok = if stage + 1 == self.stages {
                                true
                            } else {
                                let next = self.exit_link(stage, link, port);
                                if head.seq == 0 {
                                    self.buffers[stage + 1][next].owner.is_none()
                                } else {
                                    self.room_after_departures(stage + 1, next)
                                }
                            };
                            if ok {
                                cands.push(link);
                            }
                        }
                        let winner = match cands.len() {
                            0 => continue,
                            1 => cands[0],
                            n => cands[self.rng.gen_range(0..n)],
                        };
                        self.buffers[stage][winner].departing = true;
                        moves.push((stage, winner, self.exit_link(stage, winner, port)));
                    }
                }
            }

            let mut injections: Vec<(usize, usize, u32)> = Vec::new();
            for src in 0..self.ports {
                match self.feeding[src] {
                    Some((packet, seq)) => {
                        if self.room_after_departures(0, src) {
                            injections.push((src, packet, seq));
                        }
                    }
                    None => {
                        if let Some(&packet) = self.queues[src].front() {
                            if self.buffers[0][src].owner.is_none() {
                                injections.push((src, packet, 0));
                            }
                        }
                    }
                }
            }

            for (stage, link, next) in moves {
                let flit = self.buffers[stage][link].fifo.pop_front().unwrap();
                let tail = flit.seq + 1 == self.n_flits;
                if tail {
                    self.buffers[stage][link].owner = None;
                }
                if stage + 1 == self.stages {
                    assert_eq!(next, self.packets[flit.packet].destination);
                    if tail {
                        out.push(Delivered { packet: flit.packet, generated: self.packets[flit.packet].generated, delivered: cycle });
                        in_flight -= 1;
                    }
                } else {
                    let dst = &mut self.buffers[stage + 1][next];
                    if flit.seq == 0 {
                        dst.owner = Some(flit.packet);
                    }
                    dst.fifo.push_back(flit);
                }
            }
            for (src, packet, seq) in injections {
                if seq == 0 {
                    self.queues[src].pop_front();
                    self.buffers[0][src].owner = Some(packet);
                }
                self.buffers[0][src].fifo.push_back(Flit { packet, seq });
                self.feeding[src] = (seq + 1 < self.n_flits).then_some((packet, seq + 1));
            }
        }
        out
    }
}
