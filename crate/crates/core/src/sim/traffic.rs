//! Poisson packet arrivals and finite FIFO transmission buffers.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Number of packets arriving in one TTI for a Poisson flow of `rate`.
pub fn draw_arrivals<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(rate).expect("rate is positive and finite");
    let n: f64 = poisson.sample(rng);
    n as u32
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Packet {
    /// Original size in bits.
    pub size: u32,
    /// Bits not yet delivered. Equal to `size` until the packet is partially sent.
    pub remaining: u32,
    pub arrival_tti: u64,
}

/// Result of draining bits from the head of a queue.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Drain {
    pub bits: u64,
    pub packets_completed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UeBuffer {
    queue: VecDeque<Packet>,
    capacity: usize,
    arrived_total: u64,
    sent_total: u64,
    dropped_overflow: u64,
    dropped_expired: u64,
}

impl UeBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "buffer capacity must be at least 1");
        Self {
            queue: VecDeque::with_capacity(capacity),
            capacity,
            arrived_total: 0,
            sent_total: 0,
            dropped_overflow: 0,
            dropped_expired: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn spare(&self) -> usize {
        self.capacity - self.queue.len()
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.queue.iter()
    }

    pub fn head(&self) -> Option<&Packet> {
        self.queue.front()
    }

    pub fn queued_bits(&self) -> u64 {
        self.queue.iter().map(|p| p.remaining as u64).sum()
    }

    pub fn arrived_total(&self) -> u64 {
        self.arrived_total
    }

    pub fn sent_total(&self) -> u64 {
        self.sent_total
    }

    pub fn dropped_total(&self) -> u64 {
        self.dropped_overflow + self.dropped_expired
    }

    pub fn dropped_overflow(&self) -> u64 {
        self.dropped_overflow
    }

    pub fn dropped_expired(&self) -> u64 {
        self.dropped_expired
    }

    /// Admit up to the spare capacity; the rest overflow.
    /// Returns `(admitted, dropped)`.
    pub fn admit(&mut self, n_new: u32, now: u64, packet_size: u32) -> (u32, u32) {
        let admitted = (n_new as usize).min(self.spare()) as u32;
        let dropped = n_new - admitted;
        for _ in 0..admitted {
            self.queue.push_back(Packet {
                size: packet_size,
                remaining: packet_size,
                arrival_tti: now,
            });
        }
        self.arrived_total += n_new as u64;
        self.dropped_overflow += dropped as u64;
        (admitted, dropped)
    }

    /// Drop every head packet that has waited `max_delay` TTIs or more.
    ///
    /// The queue is FIFO so arrival times are non-decreasing from the head.
    pub fn expire(&mut self, now: u64, max_delay: u32) -> u32 {
        let mut dropped = 0;
        while let Some(head) = self.queue.front() {
            if now.saturating_sub(head.arrival_tti) >= max_delay as u64 {
                self.queue.pop_front();
                dropped += 1;
            } else {
                break;
            }
        }
        self.dropped_expired += dropped as u64;
        dropped
    }

    /// Deliver up to `bits` from the head. A packet counts as sent only once
    /// its last bit is delivered; a partial packet keeps its residual.
    pub fn drain(&mut self, bits: u64) -> Drain {
        let mut budget = bits;
        let mut out = Drain::default();
        while budget > 0 {
            let Some(head) = self.queue.front_mut() else {
                break;
            };
            let take = budget.min(head.remaining as u64);
            head.remaining -= take as u32;
            budget -= take;
            out.bits += take;
            if head.remaining == 0 {
                self.queue.pop_front();
                out.packets_completed += 1;
            }
        }
        self.sent_total += out.packets_completed;
        out
    }

    /// `arrived = sent + dropped + queued`.
    pub fn is_conserved(&self) -> bool {
        self.arrived_total == self.sent_total + self.dropped_total() + self.queue.len() as u64
    }
}
