//! Trace ingestion: the canonical packet CSV and classic (non-ng) pcap
//! capture files.
//!
//! The canonical CSV is `t,src,dst,port` with decimal seconds and
//! dotted-quad IPv4 addresses. Pcap support covers the classic
//! microsecond container in both byte orders, Ethernet link type only;
//! IPv4 TCP/UDP packets become records, everything else lands in the
//! skip counters.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::features::Label;
use crate::flow::PacketRecord;

const PCAP_MAGIC_US: u32 = 0xa1b2_c3d4;
const PCAP_MAGIC_US_SWAPPED: u32 = 0xd4c3_b2a1;
const PCAP_MAGIC_NS: u32 = 0xa1b2_3c4d;
const PCAP_MAGIC_NS_SWAPPED: u32 = 0x4d3c_b2a1;
const PCAPNG_MAGIC: u32 = 0x0a0d_0d0a;

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_VLAN: u16 = 0x8100;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("missing or wrong header, expected `t,src,dst,port`")]
    BadCsvHeader,
    #[error("{bad} of {total} rows malformed (more than 1%); first: line {first_line}: {first_reason}")]
    TooManyBadRows {
        bad: usize,
        total: usize,
        first_line: usize,
        first_reason: String,
    },
    #[error("not a pcap file (magic {0:#010x})")]
    BadMagic(u32),
    #[error("nanosecond-resolution pcap is not supported")]
    NanosecondPcap,
    #[error("pcapng containers are not supported, convert to classic pcap first")]
    PcapNg,
    #[error("unsupported link type {0}, only Ethernet (1) is handled")]
    UnsupportedLinkType(u32),
    #[error("pcap global header truncated")]
    TruncatedGlobalHeader,
}

/// A parse problem on one CSV row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub line: usize,
    pub reason: String,
}

/// Result of reading the canonical CSV: time-sorted records plus any
/// tolerated (≤ 1%) malformed rows.
#[derive(Debug, Clone)]
pub struct CsvTrace {
    pub records: Vec<PacketRecord>,
    pub skipped_rows: Vec<RowIssue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    CanonicalCsv,
    Pcap,
}

/// Packets-per-category accounting for one pcap read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipCounters {
    /// Frames that are not IPv4 (ARP, IPv6, nested VLAN, ...).
    pub non_ipv4: u64,
    /// IPv4 packets without a readable transport port (non-TCP/UDP
    /// protocols and continuation fragments).
    pub non_transport: u64,
    /// Truncated or structurally invalid records.
    pub malformed: u64,
}

impl SkipCounters {
    pub fn total(&self) -> u64 {
        self.non_ipv4 + self.non_transport + self.malformed
    }
}

/// Where a trace came from and what was skipped reading it.
#[derive(Debug, Clone)]
pub struct TraceSource {
    pub path: PathBuf,
    pub format: TraceFormat,
    pub skip: SkipCounters,
}

pub const PACKET_CSV_HEADER: &str = "t,src,dst,port";

/// Write packet records in the canonical CSV format.
pub fn write_packets_csv<W: Write>(mut out: W, packets: &[PacketRecord]) -> io::Result<()> {
    writeln!(out, "{PACKET_CSV_HEADER}")?;
    for p in packets {
        writeln!(out, "{},{},{},{}", p.t, p.src, p.dst, p.port)?;
    }
    Ok(())
}

pub fn write_packets_csv_path(path: &Path, packets: &[PacketRecord]) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_packets_csv(io::BufWriter::new(file), packets)
}

fn parse_packet_row(row: &str) -> Result<PacketRecord, String> {
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, got {}", fields.len()));
    }
    let t = fields[0]
        .parse::<f64>()
        .map_err(|e| format!("time `{}`: {e}", fields[0]))?;
    if !t.is_finite() || t < 0.0 {
        return Err(format!("time must be a non-negative number, got {t}"));
    }
    let src = fields[1]
        .parse::<Ipv4Addr>()
        .map_err(|e| format!("source address `{}`: {e}", fields[1]))?;
    let dst = fields[2]
        .parse::<Ipv4Addr>()
        .map_err(|e| format!("destination address `{}`: {e}", fields[2]))?;
    let port = fields[3]
        .parse::<u16>()
        .map_err(|e| format!("port `{}`: {e}", fields[3]))?;
    Ok(PacketRecord::new(t, src, dst, port))
}

/// Read the canonical packet CSV. Rows may appear in any time order; the
/// output is sorted by time (stable). Up to 1% malformed rows are
/// tolerated and reported; beyond that the whole read fails.
pub fn read_packets_csv<R: Read>(reader: R) -> Result<CsvTrace, IngestError> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().ok_or(IngestError::BadCsvHeader)??;
    if header.trim_end() != PACKET_CSV_HEADER {
        return Err(IngestError::BadCsvHeader);
    }
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut total_rows = 0usize;
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let row = line.trim_end();
        if row.is_empty() {
            continue;
        }
        total_rows += 1;
        match parse_packet_row(row) {
            Ok(rec) => records.push(rec),
            Err(reason) => skipped.push(RowIssue { line: idx + 2, reason }),
        }
    }
    if !skipped.is_empty() && skipped.len() as f64 > 0.01 * total_rows as f64 {
        let first = &skipped[0];
        return Err(IngestError::TooManyBadRows {
            bad: skipped.len(),
            total: total_rows,
            first_line: first.line,
            first_reason: first.reason.clone(),
        });
    }
    records.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(CsvTrace { records, skipped_rows: skipped })
}

pub fn read_packets_csv_path(path: &Path) -> Result<CsvTrace, IngestError> {
    let file = std::fs::File::open(path)?;
    read_packets_csv(file)
}

pub const LABEL_CSV_HEADER: &str = "window,label";

/// Write per-window ground-truth labels.
pub fn write_labels_csv<W: Write>(mut out: W, labels: &[Label]) -> io::Result<()> {
    writeln!(out, "{LABEL_CSV_HEADER}")?;
    for (k, label) in labels.iter().enumerate() {
        writeln!(out, "{k},{label}")?;
    }
    Ok(())
}

pub fn write_labels_csv_path(path: &Path, labels: &[Label]) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_labels_csv(io::BufWriter::new(file), labels)
}

/// Read a label file written by [`write_labels_csv`]. Windows must be
/// consecutive starting at 0.
pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<Label>, IngestError> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().ok_or(IngestError::BadCsvHeader)??;
    if header.trim_end() != LABEL_CSV_HEADER {
        return Err(IngestError::BadCsvHeader);
    }
    let mut labels = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let row = line.trim_end();
        if row.is_empty() {
            continue;
        }
        let lineno = idx + 2;
        let bad = |reason: String| {
            IngestError::Io(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("line {lineno}: {reason}"),
            ))
        };
        let (win, lab) = row
            .split_once(',')
            .ok_or_else(|| bad("expected `window,label`".into()))?;
        let window = win
            .parse::<usize>()
            .map_err(|e| bad(format!("window `{win}`: {e}")))?;
        if window != labels.len() {
            return Err(bad(format!("expected window {}, got {window}", labels.len())));
        }
        let value = lab
            .parse::<i8>()
            .map_err(|e| bad(format!("label `{lab}`: {e}")))?;
        let label =
            Label::from_i8(value).ok_or_else(|| bad(format!("label must be 1 or -1, got {value}")))?;
        labels.push(label);
    }
    Ok(labels)
}

pub fn read_labels_csv_path(path: &Path) -> Result<Vec<Label>, IngestError> {
    let file = std::fs::File::open(path)?;
    read_labels_csv(file)
}

fn read_u32(buf: &[u8], offset: usize, swapped: bool) -> u32 {
    let bytes: [u8; 4] = buf[offset..offset + 4].try_into().expect("bounds checked");
    if swapped {
        u32::from_be_bytes(bytes)
    } else {
        u32::from_le_bytes(bytes)
    }
}

fn read_u16_net(buf: &[u8], offset: usize) -> u16 {
    u16::from_be_bytes(buf[offset..offset + 2].try_into().expect("bounds checked"))
}

enum Frame {
    Packet { src: Ipv4Addr, dst: Ipv4Addr, port: u16 },
    NonIpv4,
    NonTransport,
    Malformed,
}

/// Decode one Ethernet frame down to the transport destination port.
fn decode_frame(data: &[u8]) -> Frame {
    if data.len() < 14 {
        return Frame::Malformed;
    }
    let mut ethertype = read_u16_net(data, 12);
    let mut offset = 14;
    if ethertype == ETHERTYPE_VLAN {
        if data.len() < 18 {
            return Frame::Malformed;
        }
        ethertype = read_u16_net(data, 16);
        offset = 18;
        if ethertype == ETHERTYPE_VLAN {
            // Only one VLAN level is unwrapped.
            return Frame::NonIpv4;
        }
    }
    if ethertype != ETHERTYPE_IPV4 {
        return Frame::NonIpv4;
    }
    if data.len() < offset + 20 {
        return Frame::Malformed;
    }
    let ip = &data[offset..];
    let version = ip[0] >> 4;
    let ihl = (ip[0] & 0x0f) as usize;
    if version != 4 || ihl < 5 {
        return Frame::Malformed;
    }
    let header_len = ihl * 4;
    if ip.len() < header_len {
        return Frame::Malformed;
    }
    let fragment_offset = read_u16_net(ip, 6) & 0x1fff;
    if fragment_offset != 0 {
        // Continuation fragments carry no transport header.
        return Frame::NonTransport;
    }
    let protocol = ip[9];
    if protocol != 6 && protocol != 17 {
        return Frame::NonTransport;
    }
    if ip.len() < header_len + 4 {
        return Frame::Malformed;
    }
    let src = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
    let port = read_u16_net(ip, header_len + 2);
    Frame::Packet { src, dst, port }
}

/// Read a classic pcap capture. Timestamps are rebased so the earliest
/// emitted packet sits at t = 0 and the output is time-sorted. A
/// truncated record stops the read with the partial result and bumps the
/// malformed counter.
pub fn read_pcap<R: Read>(mut reader: R, path: &Path) -> Result<(Vec<PacketRecord>, TraceSource), IngestError> {
    let mut global = [0u8; 24];
    let mut filled = 0usize;
    while filled < 24 {
        let n = reader.read(&mut global[filled..])?;
        if n == 0 {
            return Err(IngestError::TruncatedGlobalHeader);
        }
        filled += n;
    }
    let magic = u32::from_le_bytes(global[0..4].try_into().expect("4 bytes"));
    let swapped = match magic {
        PCAP_MAGIC_US => false,
        PCAP_MAGIC_US_SWAPPED => true,
        PCAP_MAGIC_NS | PCAP_MAGIC_NS_SWAPPED => return Err(IngestError::NanosecondPcap),
        PCAPNG_MAGIC => return Err(IngestError::PcapNg),
        other => {
            if u32::from_be_bytes(global[0..4].try_into().expect("4 bytes")) == PCAPNG_MAGIC {
                return Err(IngestError::PcapNg);
            }
            return Err(IngestError::BadMagic(other));
        }
    };
    let link_type = read_u32(&global, 20, swapped);
    if link_type != 1 {
        return Err(IngestError::UnsupportedLinkType(link_type));
    }

    let mut skip = SkipCounters::default();
    // (timestamp in µs, src, dst, port)
    let mut raw: Vec<(u64, Ipv4Addr, Ipv4Addr, u16)> = Vec::new();
    let mut header = [0u8; 16];
    'records: loop {
        let mut got = 0usize;
        while got < 16 {
            let n = reader.read(&mut header[got..])?;
            if n == 0 {
                if got == 0 {
                    break 'records; // clean EOF
                }
                skip.malformed += 1;
                break 'records;
            }
            got += n;
        }
        let ts_sec = read_u32(&header, 0, swapped) as u64;
        let ts_usec = read_u32(&header, 4, swapped) as u64;
        let incl_len = read_u32(&header, 8, swapped) as usize;
        let mut data = vec![0u8; incl_len];
        let mut got = 0usize;
        while got < incl_len {
            let n = reader.read(&mut data[got..])?;
            if n == 0 {
                skip.malformed += 1;
                break 'records;
            }
            got += n;
        }
        match decode_frame(&data) {
            Frame::Packet { src, dst, port } => {
                raw.push((ts_sec * 1_000_000 + ts_usec, src, dst, port));
            }
            Frame::NonIpv4 => skip.non_ipv4 += 1,
            Frame::NonTransport => skip.non_transport += 1,
            Frame::Malformed => skip.malformed += 1,
        }
    }

    raw.sort_by_key(|r| r.0);
    let t0 = raw.first().map_or(0, |r| r.0);
    let records = raw
        .into_iter()
        .map(|(ts, src, dst, port)| {
            PacketRecord::new((ts - t0) as f64 / 1e6, src, dst, port)
        })
        .collect();
    let source = TraceSource {
        path: path.to_path_buf(),
        format: TraceFormat::Pcap,
        skip,
    };
    Ok((records, source))
}

pub fn read_pcap_path(path: &Path) -> Result<(Vec<PacketRecord>, TraceSource), IngestError> {
    let file = std::fs::File::open(path)?;
    read_pcap(BufReader::new(file), path)
}

/// Read packets from either supported format, guessing pcap from the
/// `.pcap`/`.cap` extension and falling back to CSV.
pub fn read_trace_path(path: &Path) -> Result<(Vec<PacketRecord>, TraceSource), IngestError> {
    let is_pcap = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("pcap") | Some("cap")
    );
    if is_pcap {
        read_pcap_path(path)
    } else {
        let trace = read_packets_csv_path(path)?;
        Ok((
            trace.records,
            TraceSource {
                path: path.to_path_buf(),
                format: TraceFormat::CanonicalCsv,
                skip: SkipCounters::default(),
            },
        ))
    }
}
