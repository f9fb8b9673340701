//! Per-round trace records and streaming sinks.
//!
//! Policies emit one [`TraceRecord`] per round to a [`TraceSink`]. Sinks are
//! streaming by design: a long run produces far more trace data than is
//! reasonable to hold in memory, so consumers (diagnostics, file writers)
//! process records as they arrive. [`MemorySink`] exists for small tests;
//! [`NullSink`] is the zero-cost default; [`JsonlSink`] writes the
//! line-delimited interchange format.
//!
//! Indices are 0-based in memory and 1-based in the JSONL form, matching the
//! rest of the crate's I/O convention.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// One reward draw: which pair was pulled and what it paid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullRecord {
    pub arm: usize,
    pub attr: usize,
    pub reward: f64,
}

/// Sizes of the empirical sets after a round's classification.
///
/// Pair counts run over live (never-excluded) arms only; excluded arms keep
/// frozen bounds and are permanently outside every pair/arm set except
/// `contenders`, which by definition ranges over all arms. Elimination
/// policies fill these fields from their own bound state; the round-1
/// bootstrap record predates any classification and carries zeros.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetSizes {
    /// Pairs whose lower bound clears the threshold.
    pub confirmed_pairs: usize,
    /// Pairs whose interval straddles the threshold.
    pub boundary_pairs: usize,
    /// Pairs whose upper bound clears the threshold (union of the above).
    pub plausible_pairs: usize,
    /// Arms with every attribute confirmed.
    pub confirmed_arms: usize,
    /// Arms plausible but not confirmed.
    pub boundary_arms: usize,
    /// Arms with every attribute plausible.
    pub plausible_arms: usize,
    /// Arms still in contention with the confirmed-best arm.
    pub contenders: usize,
}

/// Everything a policy knows about one round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Round index `t` (1 is the bootstrap round).
    pub round: u64,
    /// Pairs pulled this round with their rewards; empty on the stop round,
    /// and also empty when the sink does not want records.
    pub pulls: Vec<PullRecord>,
    /// Set sizes from this round's classification.
    pub sets: SetSizes,
    /// Best confirmed arm, when one exists.
    pub confirmed_best: Option<usize>,
    /// Empirical leader driving the round's pulls.
    pub leader: Option<usize>,
    /// The leader's strongest competitor, when one exists.
    pub competitor: Option<usize>,
    /// Arms permanently removed from contention this round.
    pub removed: Vec<usize>,
    /// Whether the run stopped at this round (no pulls follow).
    pub stop: bool,
}

/// Streaming consumer of trace records.
pub trait TraceSink {
    /// Whether the sink reads the per-pull reward log. Policies skip
    /// building [`TraceRecord::pulls`] when this is `false`, which makes
    /// untraced runs allocation-free on the trace path.
    fn wants_records(&self) -> bool {
        true
    }

    /// Consumes one round's record.
    fn record(&mut self, rec: &TraceRecord);
}

/// Discards everything; the default sink for untraced runs.
#[derive(Debug, Default)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn wants_records(&self) -> bool {
        false
    }

    fn record(&mut self, _rec: &TraceRecord) {}
}

/// Buffers every record in memory. Only suitable for short runs (tests,
/// tiny instances): records hold the full reward log.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub records: Vec<TraceRecord>,
}

impl TraceSink for MemorySink {
    fn record(&mut self, rec: &TraceRecord) {
        self.records.push(rec.clone());
    }
}

/// Wire form of a record: 1-based indices, one JSON object per line.
#[derive(Serialize, Deserialize)]
struct WireRecord {
    t: u64,
    pulls: Vec<WirePull>,
    sets: SetSizes,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    confirmed_best: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    leader: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    competitor: Option<usize>,
    removed: Vec<usize>,
    stop: bool,
}

#[derive(Serialize, Deserialize)]
struct WirePull {
    arm: usize,
    attr: usize,
    reward: f64,
}

impl From<&TraceRecord> for WireRecord {
    fn from(rec: &TraceRecord) -> Self {
        WireRecord {
            t: rec.round,
            pulls: rec
                .pulls
                .iter()
                .map(|p| WirePull {
                    arm: p.arm + 1,
                    attr: p.attr + 1,
                    reward: p.reward,
                })
                .collect(),
            sets: rec.sets,
            confirmed_best: rec.confirmed_best.map(|i| i + 1),
            leader: rec.leader.map(|i| i + 1),
            competitor: rec.competitor.map(|i| i + 1),
            removed: rec.removed.iter().map(|&i| i + 1).collect(),
            stop: rec.stop,
        }
    }
}

impl From<WireRecord> for TraceRecord {
    fn from(wire: WireRecord) -> Self {
        TraceRecord {
            round: wire.t,
            pulls: wire
                .pulls
                .into_iter()
                .map(|p| PullRecord {
                    arm: p.arm - 1,
                    attr: p.attr - 1,
                    reward: p.reward,
                })
                .collect(),
            sets: wire.sets,
            confirmed_best: wire.confirmed_best.map(|i| i - 1),
            leader: wire.leader.map(|i| i - 1),
            competitor: wire.competitor.map(|i| i - 1),
            removed: wire.removed.into_iter().map(|i| i - 1).collect(),
            stop: wire.stop,
        }
    }
}

/// Parses one JSONL line back into a record.
pub fn parse_trace_line(line: &str) -> Result<TraceRecord, serde_json::Error> {
    serde_json::from_str::<WireRecord>(line).map(TraceRecord::from)
}

/// Writes records as line-delimited JSON (1-based indices).
///
/// I/O errors are captured and surfaced by [`JsonlSink::finish`]; once an
/// error occurs further records are dropped.
pub struct JsonlSink<W: Write> {
    writer: W,
    error: Option<io::Error>,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(writer: W) -> Self {
        Self {
            writer,
            error: None,
        }
    }

    /// Returns the writer, or the first I/O error encountered.
    pub fn finish(mut self) -> io::Result<W> {
        match self.error.take() {
            Some(e) => Err(e),
            None => {
                self.writer.flush()?;
                Ok(self.writer)
            }
        }
    }
}

impl<W: Write> TraceSink for JsonlSink<W> {
    fn record(&mut self, rec: &TraceRecord) {
        if self.error.is_some() {
            return;
        }
        let wire = WireRecord::from(rec);
        let result = serde_json::to_writer(&mut self.writer, &wire)
            .map_err(io::Error::from)
            .and_then(|()| self.writer.write_all(b"\n"));
        if let Err(e) = result {
            self.error = Some(e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> TraceRecord {
        TraceRecord {
            round: 7,
            pulls: vec![
                PullRecord {
                    arm: 0,
                    attr: 1,
                    reward: 0.123_456_789_012_345_67,
                },
                PullRecord {
                    arm: 2,
                    attr: 0,
                    reward: 1.0,
                },
            ],
            sets: SetSizes {
                confirmed_pairs: 4,
                boundary_pairs: 2,
                plausible_pairs: 6,
                confirmed_arms: 1,
                boundary_arms: 2,
                plausible_arms: 3,
                contenders: 2,
            },
            confirmed_best: Some(0),
            leader: Some(0),
            competitor: Some(2),
            removed: vec![1],
            stop: false,
        }
    }

    #[test]
    fn null_sink_declines_records() {
        let mut sink = NullSink;
        assert!(!sink.wants_records());
        sink.record(&sample_record());
    }

    #[test]
    fn memory_sink_stores_in_order() {
        let mut sink = MemorySink::default();
        assert!(sink.wants_records());
        let mut rec = sample_record();
        sink.record(&rec);
        rec.round = 8;
        sink.record(&rec);
        assert_eq!(sink.records.len(), 2);
        assert_eq!(sink.records[0].round, 7);
        assert_eq!(sink.records[1].round, 8);
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let records = vec![
            sample_record(),
            TraceRecord {
                round: 8,
                pulls: Vec::new(),
                sets: SetSizes::default(),
                confirmed_best: None,
                leader: None,
                competitor: None,
                removed: Vec::new(),
                stop: true,
            },
        ];
        let mut sink = JsonlSink::new(Vec::new());
        for rec in &records {
            sink.record(rec);
        }
        let bytes = sink.finish().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let parsed: Vec<TraceRecord> = text.lines().map(|l| parse_trace_line(l).unwrap()).collect();
        assert_eq!(parsed, records, "bit-exact rewards and identical fields");
    }

    #[test]
    fn jsonl_uses_one_based_indices() {
        let mut sink = JsonlSink::new(Vec::new());
        sink.record(&sample_record());
        let text = String::from_utf8(sink.finish().unwrap()).unwrap();
        assert!(text.contains(r#""arm":1,"attr":2"#), "{text}");
        assert!(text.contains(r#""leader":1"#), "{text}");
        assert!(text.contains(r#""competitor":3"#), "{text}");
        assert!(text.contains(r#""removed":[2]"#), "{text}");
    }

    #[test]
    fn jsonl_omits_absent_arms() {
        let mut sink = JsonlSink::new(Vec::new());
        sink.record(&TraceRecord {
            round: 1,
            pulls: Vec::new(),
            sets: SetSizes::default(),
            confirmed_best: None,
            leader: None,
            competitor: None,
            removed: Vec::new(),
            stop: false,
        });
        let text = String::from_utf8(sink.finish().unwrap()).unwrap();
        assert!(!text.contains("confirmed_best"), "{text}");
        assert!(!text.contains("leader"), "{text}");
    }
}
