//! Windowing of packet streams and partition of each window into
//! flow-class families.
//!
//! A window's packets are grouped by (source, destination) into `SD`
//! classes, and the address set splits into interactive addresses (seen
//! in both directions), source-half flows `SH` (sources never replied
//! to) and destination-half flows `DH` (destinations that never send).
//! From these the derived families are built:
//!
//! * `ACS` — `SD` classes whose source talks to exactly one destination,
//! * `SDD` — per-destination merges of `SD` classes for destinations fed
//!   by at least two distinct sources,
//! * `HSD` — single-destination `SH` flows grouped by their victim, with
//!   source and port counts.
//!
//! All functions are pure; windows can be classified in parallel.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

/// One captured packet: time, source, destination, destination port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    /// Seconds since the start of the trace, non-negative.
    pub t: f64,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    /// Destination port.
    pub port: u16,
}

impl PacketRecord {
    pub fn new(t: f64, src: Ipv4Addr, dst: Ipv4Addr, port: u16) -> Self {
        Self { t, src, dst, port }
    }
}

/// A half-open time slice `[start, start + duration)` and its packets,
/// ordered by time.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowWindow {
    pub start: f64,
    pub duration: f64,
    pub packets: Vec<PacketRecord>,
}

/// Key of an `SD` class: (source, destination).
pub type ClassKey = (Ipv4Addr, Ipv4Addr);

/// An `HSD` class: `SH` flows sharing one destination.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HsdClass {
    /// Number of distinct half-interaction sources aimed at this destination.
    pub hn: usize,
    /// Number of distinct destination ports across those flows.
    pub port_count: usize,
}

/// The class families of one window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowClasses {
    /// All `SD(src, dst)` classes.
    pub sd: BTreeMap<ClassKey, Vec<PacketRecord>>,
    /// Addresses appearing as a source of some packet and a destination of some packet.
    pub if_set: BTreeSet<Ipv4Addr>,
    /// Source-half flows: per-source packets for sources never seen as a destination.
    pub sh: BTreeMap<Ipv4Addr, Vec<PacketRecord>>,
    /// Destination-half flows: per-destination packets for destinations never seen as a source.
    pub dh: BTreeMap<Ipv4Addr, Vec<PacketRecord>>,
    /// `SD` classes surviving the multi-destination deletion rule.
    pub acs: BTreeMap<ClassKey, Vec<PacketRecord>>,
    /// Merged per-destination classes for destinations with ≥ 2 distinct sources.
    pub sdd: BTreeMap<Ipv4Addr, Vec<PacketRecord>>,
    /// Half-interaction groups per destination.
    pub hsd: BTreeMap<Ipv4Addr, HsdClass>,
}

/// Cut a packet stream into contiguous windows `[k·dt, (k+1)·dt)` covering
/// `[0, max t]`. Empty windows are emitted so the series stays gap-free.
/// Unsorted input is sorted by time first.
///
/// Panics if `dt <= 0`.
pub fn partition_windows(packets: &[PacketRecord], dt: f64) -> Vec<FlowWindow> {
    assert!(dt > 0.0, "window length must be positive");
    if packets.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<PacketRecord> = packets.to_vec();
    if !sorted.windows(2).all(|w| w[0].t <= w[1].t) {
        sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    let max_t = sorted.last().expect("non-empty").t;
    let count = (max_t / dt).floor() as usize + 1;
    let mut windows: Vec<FlowWindow> = (0..count)
        .map(|k| FlowWindow {
            start: k as f64 * dt,
            duration: dt,
            packets: Vec::new(),
        })
        .collect();
    for p in sorted {
        let k = ((p.t / dt).floor() as usize).min(count - 1);
        windows[k].packets.push(p);
    }
    windows
}

/// Partition one window into its flow-class families.
///
/// Deterministic: contents depend only on the packet multiset, not on
/// packet order.
pub fn classify_flows(window: &FlowWindow) -> FlowClasses {
    let mut classes = FlowClasses::default();
    if window.packets.is_empty() {
        return classes;
    }

    let mut sources: BTreeSet<Ipv4Addr> = BTreeSet::new();
    let mut dests: BTreeSet<Ipv4Addr> = BTreeSet::new();
    for p in &window.packets {
        sources.insert(p.src);
        dests.insert(p.dst);
        classes.sd.entry((p.src, p.dst)).or_default().push(*p);
    }

    classes.if_set = sources.intersection(&dests).copied().collect();

    for p in &window.packets {
        if !dests.contains(&p.src) {
            classes.sh.entry(p.src).or_default().push(*p);
        }
        if !sources.contains(&p.dst) {
            classes.dh.entry(p.dst).or_default().push(*p);
        }
    }

    // Destination fan-out per source and distinct sources per destination.
    let mut dst_of_src: BTreeMap<Ipv4Addr, BTreeSet<Ipv4Addr>> = BTreeMap::new();
    let mut src_of_dst: BTreeMap<Ipv4Addr, BTreeSet<Ipv4Addr>> = BTreeMap::new();
    for &(s, d) in classes.sd.keys() {
        dst_of_src.entry(s).or_default().insert(d);
        src_of_dst.entry(d).or_default().insert(s);
    }

    // ACS: drop every class whose source has more than one distinct destination.
    for (&(s, d), pkts) in &classes.sd {
        if dst_of_src[&s].len() == 1 {
            classes.acs.insert((s, d), pkts.clone());
        }
    }

    // SDD: destinations with a single source class are dropped, the rest
    // merged by destination.
    for (&(_, d), pkts) in &classes.sd {
        if src_of_dst[&d].len() >= 2 {
            classes.sdd.entry(d).or_default().extend(pkts.iter().copied());
        }
    }

    // HSD: SH flows grouped by destination. A flow belongs to a group only
    // when it has a single distinct destination; multi-destination half
    // flows have no well-defined group.
    let mut hsd_ports: BTreeMap<Ipv4Addr, BTreeSet<u16>> = BTreeMap::new();
    for (src, pkts) in &classes.sh {
        let flow_dests = &dst_of_src[src];
        if flow_dests.len() != 1 {
            continue;
        }
        let dest = *flow_dests.iter().next().expect("one destination");
        let entry = classes.hsd.entry(dest).or_default();
        entry.hn += 1;
        let ports = hsd_ports.entry(dest).or_default();
        for p in pkts {
            ports.insert(p.port);
        }
    }
    for (dest, ports) in hsd_ports {
        classes.hsd.get_mut(&dest).expect("grouped above").port_count = ports.len();
    }

    classes
}

/// Distinct destination ports in a packet slice.
pub fn distinct_ports(packets: &[PacketRecord]) -> usize {
    packets.iter().map(|p| p.port).collect::<BTreeSet<u16>>().len()
}

/// Distinct source addresses in a packet slice.
pub fn distinct_sources(packets: &[PacketRecord]) -> usize {
    packets.iter().map(|p| p.src).collect::<BTreeSet<Ipv4Addr>>().len()
}
