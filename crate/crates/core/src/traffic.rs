//! Seeded synthetic traffic: bidirectional normal sessions, spoofed-source
//! flood attacks, and the three labelled scenario presets (early, impulse,
//! intermittent).
//!
//! Determinism contract: everything is driven by ChaCha8 streams derived
//! from the spec seed, so identical specs produce byte-identical packet
//! sequences on every platform.
//!
//! Address plan: normal hosts come from 10.0.0.0/16, telemetry senders
//! and their sink from 10.0.200.0/24, victims from 192.168.1.0/24 and
//! spoofed attack sources from 172.16.0.0/12.

use std::net::Ipv4Addr;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::Label;
use crate::flow::PacketRecord;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("rates must be positive")]
    NonPositiveRate,
    #[error("normal traffic needs at least 2 hosts, got {0}")]
    TooFewHosts(usize),
    #[error("attack interval [{start}, {end}) is not inside [0, {duration})")]
    IntervalOutOfRange { start: f64, end: f64, duration: f64 },
    #[error("attack intervals must be non-empty and ordered")]
    BadIntervals,
    #[error("early scenarios start attacking at t = 0, first interval starts at {0}")]
    EarlyMustStartAtZero(f64),
    #[error("impulse scenarios use exactly one attack interval, got {0}")]
    ImpulseNeedsOneInterval(usize),
    #[error("intermittent scenarios use at least two attack intervals, got {0}")]
    IntermittentNeedsMultiple(usize),
    #[error("spoof pool ({pool}) must be at least 10x the victim count ({victims})")]
    SpoofPoolTooSmall { pool: usize, victims: usize },
    #[error("victim count must be in 1..=254, got {0}")]
    BadVictimCount(usize),
}

/// The three scenario shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Attack from the first window onward.
    Early,
    /// One short burst inside a normal-dominated trace.
    Impulse,
    /// Several disjoint bursts of differing strength.
    Intermittent,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Early => "early",
            ScenarioKind::Impulse => "impulse",
            ScenarioKind::Intermittent => "intermittent",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "early" => Some(ScenarioKind::Early),
            "impulse" => Some(ScenarioKind::Impulse),
            "intermittent" => Some(ScenarioKind::Intermittent),
            _ => None,
        }
    }
}

/// Parameters of one synthetic scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub duration: f64,
    pub normal_rate: f64,
    pub attack_rate: f64,
    pub normal_host_count: usize,
    pub spoof_pool_size: usize,
    pub victim_count: usize,
    /// Half-open `[start, end)` attack ranges in seconds.
    pub attack_intervals: Vec<(f64, f64)>,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Preset calibrated so a 1 s window grid yields 491 windows with the
    /// published normal/attack split of each scenario.
    pub fn preset(kind: ScenarioKind, seed: u64) -> ScenarioSpec {
        let attack_intervals = match kind {
            // 280 attack windows, 211 normal.
            ScenarioKind::Early => vec![(0.0, 280.0)],
            // 107 attack windows, 384 normal.
            ScenarioKind::Impulse => vec![(192.0, 299.0)],
            // 100 + 100 + 100 + 111 = 411 attack windows, 80 normal.
            ScenarioKind::Intermittent => {
                vec![(20.0, 120.0), (140.0, 240.0), (260.0, 360.0), (380.0, 491.0)]
            }
        };
        ScenarioSpec {
            kind,
            duration: 491.0,
            normal_rate: 120.0,
            attack_rate: 60.0,
            normal_host_count: 24,
            spoof_pool_size: 4000,
            victim_count: 2,
            attack_intervals,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(self.duration > 0.0) {
            return Err(TrafficError::NonPositiveDuration(self.duration));
        }
        if !(self.normal_rate > 0.0 && self.attack_rate > 0.0) {
            return Err(TrafficError::NonPositiveRate);
        }
        if self.normal_host_count < 2 {
            return Err(TrafficError::TooFewHosts(self.normal_host_count));
        }
        if self.victim_count == 0 || self.victim_count > 254 {
            return Err(TrafficError::BadVictimCount(self.victim_count));
        }
        if self.spoof_pool_size < 10 * self.victim_count {
            return Err(TrafficError::SpoofPoolTooSmall {
                pool: self.spoof_pool_size,
                victims: self.victim_count,
            });
        }
        if self.attack_intervals.is_empty() {
            return Err(TrafficError::BadIntervals);
        }
        let mut prev_end = 0.0f64;
        for (i, &(start, end)) in self.attack_intervals.iter().enumerate() {
            if !(start >= 0.0 && end > start && end <= self.duration) {
                return Err(TrafficError::IntervalOutOfRange {
                    start,
                    end,
                    duration: self.duration,
                });
            }
            if i > 0 && start < prev_end {
                return Err(TrafficError::BadIntervals);
            }
            prev_end = end;
        }
        match self.kind {
            ScenarioKind::Early => {
                let first = self.attack_intervals[0].0;
                if first != 0.0 {
                    return Err(TrafficError::EarlyMustStartAtZero(first));
                }
            }
            ScenarioKind::Impulse => {
                if self.attack_intervals.len() != 1 {
                    return Err(TrafficError::ImpulseNeedsOneInterval(
                        self.attack_intervals.len(),
                    ));
                }
            }
            ScenarioKind::Intermittent => {
                if self.attack_intervals.len() < 2 {
                    return Err(TrafficError::IntermittentNeedsMultiple(
                        self.attack_intervals.len(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Exponential inter-arrival sample via inverse CDF.
fn exp_interval(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    -u.ln() / rate
}

fn normal_host(i: usize) -> Ipv4Addr {
    Ipv4Addr::new(10, 0, (i / 200) as u8, (i % 200 + 1) as u8)
}

fn victim_host(i: usize) -> Ipv4Addr {
    Ipv4Addr::new(192, 168, 1, (i + 1) as u8)
}

fn spoofed_host(i: usize) -> Ipv4Addr {
    Ipv4Addr::new(
        172,
        16 + ((i >> 16) & 0x0f) as u8,
        ((i >> 8) & 0xff) as u8,
        (i & 0xff) as u8,
    )
}

/// Small deterministic integer mix (splitmix64 finalizer).
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

const SERVICE_PORTS: [u16; 5] = [80, 443, 22, 25, 8080];

/// Bidirectional background traffic: Poisson request arrivals, each
/// answered from the server within the same 1 s grid cell, with a stable
/// port pair per (client, server) session. `rate` counts packets, so
/// requests arrive at `rate / 2`.
pub fn gen_normal(duration: f64, rate: f64, hosts: usize, seed: u64) -> Vec<PacketRecord> {
    assert!(hosts >= 2, "need at least one client and one server");
    assert!(duration > 0.0 && rate > 0.0);
    let mut rng = stream_rng(seed, 1);
    let client_count = hosts.div_ceil(2);
    let clients: Vec<Ipv4Addr> = (0..client_count).map(normal_host).collect();
    let servers: Vec<Ipv4Addr> = (client_count..hosts).map(normal_host).collect();

    let mut packets = Vec::new();
    let mut t = 0.0f64;
    loop {
        t += exp_interval(&mut rng, rate / 2.0);
        if t >= duration {
            break;
        }
        let c = clients[rng.random_range(0..clients.len())];
        let s = servers[rng.random_range(0..servers.len())];
        let session = mix(u64::from(u32::from(c)) << 32 | u64::from(u32::from(s)) ^ seed);
        let service = SERVICE_PORTS[(session % SERVICE_PORTS.len() as u64) as usize];
        let ephemeral = 49152 + (session >> 8) as u16 % 16384;
        packets.push(PacketRecord::new(t, c, s, service));
        // Reply stays inside the same one-second cell.
        let cell_end = t.floor() + 1.0;
        let reply_t = (t + rng.random_range(0.0005..0.02)).min(cell_end - 1e-4).max(t);
        packets.push(PacketRecord::new(reply_t.min(duration - 1e-4), s, c, ephemeral));
    }
    packets.sort_by(|a, b| a.t.total_cmp(&b.t));
    packets
}

/// One-way telemetry hum: a few senders report to a sink that never
/// replies, with occasional port-diverse bursts. Keeps the normal
/// half-interaction features realistically nonzero.
pub fn gen_telemetry(duration: f64, rate: f64, seed: u64) -> Vec<PacketRecord> {
    assert!(duration > 0.0 && rate > 0.0);
    let mut rng = stream_rng(seed, 3);
    let senders: [Ipv4Addr; 3] = [
        Ipv4Addr::new(10, 0, 200, 11),
        Ipv4Addr::new(10, 0, 200, 12),
        Ipv4Addr::new(10, 0, 200, 13),
    ];
    let sink = Ipv4Addr::new(10, 0, 200, 250);
    let report_ports: [u16; 4] = [514, 161, 2055, 6343];

    let mut packets = Vec::new();
    let mut t = 0.0f64;
    loop {
        t += exp_interval(&mut rng, rate);
        if t >= duration {
            break;
        }
        let sender = senders[rng.random_range(0..senders.len())];
        let port = report_ports[rng.random_range(0..report_ports.len())];
        packets.push(PacketRecord::new(t, sender, sink, port));
    }

    // Bursts: rare diagnostic dumps hitting many distinct ports at once.
    let mut bt = 0.0f64;
    loop {
        bt += exp_interval(&mut rng, 0.05);
        if bt >= duration {
            break;
        }
        let sender = senders[rng.random_range(0..senders.len())];
        let count = rng.random_range(8..28);
        for k in 0..count {
            let dt = rng.random_range(0.0..0.4);
            let port = 20000 + rng.random_range(0..40) as u16;
            let pt = (bt + dt).min(duration - 1e-4);
            let _ = k;
            packets.push(PacketRecord::new(pt, sender, sink, port));
        }
    }
    packets.sort_by(|a, b| a.t.total_cmp(&b.t));
    packets
}

/// Spoofed-source flood: Poisson arrivals toward a few victims over a
/// wide destination-port range, sources drawn from a large pool and
/// never appearing as destinations.
pub fn gen_attack(
    duration: f64,
    rate: f64,
    spoof_pool: usize,
    victims: usize,
    seed: u64,
) -> Vec<PacketRecord> {
    assert!(duration > 0.0 && rate > 0.0);
    assert!(
        spoof_pool >= 10 * victims,
        "spoof pool must be at least 10x the victim count"
    );
    assert!(victims >= 1 && victims <= 254);
    let mut rng = stream_rng(seed, 2);
    let victim_addrs: Vec<Ipv4Addr> = (0..victims).map(victim_host).collect();

    let mut packets = Vec::new();
    let mut t = 0.0f64;
    loop {
        t += exp_interval(&mut rng, rate);
        if t >= duration {
            break;
        }
        let src = spoofed_host(rng.random_range(0..spoof_pool));
        let dst = victim_addrs[rng.random_range(0..victims)];
        let port = rng.random_range(1024..=65535u16);
        packets.push(PacketRecord::new(t, src, dst, port));
    }
    packets
}

/// Attack strength multipliers per interval. Intermittent scenarios
/// switch between attacks of different intensity.
fn interval_multipliers(kind: ScenarioKind, intervals: usize) -> Vec<f64> {
    match kind {
        ScenarioKind::Early | ScenarioKind::Impulse => vec![1.0; intervals],
        ScenarioKind::Intermittent => {
            let cycle = [1.0, 0.4, 0.75, 0.2];
            (0..intervals).map(|i| cycle[i % cycle.len()]).collect()
        }
    }
}

/// Generate the merged, time-sorted packet stream of a scenario plus the
/// per-window ground truth (window k is an attack window iff `[k, k+1)`
/// overlaps an attack interval).
pub fn gen_scenario(spec: &ScenarioSpec) -> Result<(Vec<PacketRecord>, Vec<Label>), TrafficError> {
    spec.validate()?;
    let mut packets = gen_normal(spec.duration, spec.normal_rate, spec.normal_host_count, spec.seed);
    packets.extend(gen_telemetry(spec.duration, 0.05 * spec.normal_rate, spec.seed));

    let multipliers = interval_multipliers(spec.kind, spec.attack_intervals.len());
    for (i, (&(start, end), mult)) in spec.attack_intervals.iter().zip(&multipliers).enumerate() {
        let burst = gen_attack(
            end - start,
            spec.attack_rate * mult,
            spec.spoof_pool_size,
            spec.victim_count,
            spec.seed.wrapping_add(mix(i as u64 + 1)),
        );
        packets.extend(burst.into_iter().map(|mut p| {
            p.t += start;
            p
        }));
    }
    packets.sort_by(|a, b| a.t.total_cmp(&b.t));

    let window_count = spec.duration.ceil() as usize;
    let labels = (0..window_count)
        .map(|k| {
            let (ws, we) = (k as f64, k as f64 + 1.0);
            let attacked = spec
                .attack_intervals
                .iter()
                .any(|&(a, b)| ws < b && we > a);
            if attacked {
                Label::Attack
            } else {
                Label::Normal
            }
        })
        .collect();
    Ok((packets, labels))
}
