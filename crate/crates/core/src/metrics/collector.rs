use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::histogram::LatencyHistogram;
use crate::error::{Error, Result};
use crate::model::{HomeSpan, PartitionSpan, TxnClass, TxnId};
use crate::protocols::{Outcome, Verdict};
use crate::time::{SimTime, NANOS_PER_SEC};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub submitted: u64,
    pub committed: u64,
    pub aborted: u64,
    pub rejected: u64,
}

impl Counts {
    fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Committed => self.committed += 1,
            Verdict::Aborted(_) => self.aborted += 1,
            Verdict::Rejected(_) => self.rejected += 1,
        }
    }

    pub fn finished(&self) -> u64 {
        self.committed + self.aborted + self.rejected
    }

    pub fn merge(&mut self, o: &Counts) {
        self.submitted += o.submitted;
        self.committed += o.committed;
        self.aborted += o.aborted;
        self.rejected += o.rejected;
    }
}

/// Submitted transactions by class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMix {
    pub lsh: u64,
    pub fsh: u64,
    pub mh: u64,
    pub sp: u64,
    pub mp: u64,
}

impl ClassMix {
    pub fn add(&mut self, c: TxnClass) {
        match c.home_span {
            HomeSpan::LSH => self.lsh += 1,
            HomeSpan::FSH => self.fsh += 1,
            HomeSpan::MH => self.mh += 1,
        }
        match c.partition_span {
            PartitionSpan::SP => self.sp += 1,
            PartitionSpan::MP => self.mp += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.lsh + self.fsh + self.mh
    }

    /// (LSH, FSH, MH) as percentages of the total.
    pub fn percentages(&self) -> [f64; 3] {
        let t = self.total().max(1) as f64;
        [
            100.0 * self.lsh as f64 / t,
            100.0 * self.fsh as f64 / t,
            100.0 * self.mh as f64 / t,
        ]
    }

    pub fn merge(&mut self, o: &ClassMix) {
        self.lsh += o.lsh;
        self.fsh += o.fsh;
        self.mh += o.mh;
        self.sp += o.sp;
        self.mp += o.mp;
    }
}

/// Histogram key: `<home span>/<ro|rw>/<logic tag>`.
pub fn histogram_key(home: HomeSpan, read_only: bool, tag: &str) -> String {
    format!(
        "{}/{}/{}",
        home.name(),
        if read_only { "ro" } else { "rw" },
        tag
    )
}

/// Accumulates outcomes for one engine run.
///
/// Window statistics cover transactions *submitted* in `[warmup, end)`.
/// The throughput series bins commits by the time the client saw them.
#[derive(Debug, Clone)]
pub struct Collector {
    warmup: SimTime,
    end: SimTime,
    bin: SimTime,
    finalized: HashSet<TxnId>,
    totals: Counts,
    window: Counts,
    mix: ClassMix,
    window_mix: ClassMix,
    series: Vec<u64>,
    histograms: BTreeMap<String, LatencyHistogram>,
    window_write_bytes: u64,
    outcome_log: Option<Vec<Outcome>>,
}

impl Collector {
    pub fn new(warmup: SimTime, end: SimTime) -> Self {
        Collector {
            warmup,
            end,
            bin: NANOS_PER_SEC,
            finalized: HashSet::new(),
            totals: Counts::default(),
            window: Counts::default(),
            mix: ClassMix::default(),
            window_mix: ClassMix::default(),
            series: vec![0; end.div_ceil(NANOS_PER_SEC) as usize],
            histograms: BTreeMap::new(),
            window_write_bytes: 0,
            outcome_log: None,
        }
    }

    /// Keep every outcome for the newline-delimited outcome log.
    pub fn keep_outcomes(&mut self) {
        self.outcome_log.get_or_insert_with(Vec::new);
    }

    pub fn in_window(&self, submit: SimTime) -> bool {
        submit >= self.warmup && submit < self.end
    }

    pub fn record_submit(&mut self, submit: SimTime, class: TxnClass) {
        self.totals.submitted += 1;
        self.mix.add(class);
        if self.in_window(submit) {
            self.window.submitted += 1;
            self.window_mix.add(class);
        }
    }

    /// Records a terminal outcome. `write_bytes` is the transaction's
    /// write payload, counted toward stored volume when committed.
    pub fn record(&mut self, o: &Outcome, write_bytes: u64) -> Result<()> {
        if !self.finalized.insert(o.txn_id) {
            return Err(Error::Engine(format!(
                "duplicate outcome for txn {}",
                o.txn_id
            )));
        }
        if o.commit_time < o.submit_time {
            return Err(Error::Engine(format!(
                "txn {} finished before it was submitted",
                o.txn_id
            )));
        }
        self.totals.add(o.verdict);
        let windowed = self.in_window(o.submit_time);
        if windowed {
            self.window.add(o.verdict);
        }
        if o.verdict.is_committed() {
            let b = (o.commit_time / self.bin) as usize;
            if b >= self.series.len() {
                self.series.resize(b + 1, 0);
            }
            self.series[b] += 1;
            if windowed {
                self.window_write_bytes += write_bytes;
                self.histograms
                    .entry(histogram_key(
                        o.class.home_span,
                        o.read_only,
                        o.logic_tag.name(),
                    ))
                    .or_default()
                    .record(o.latency());
            }
        }
        if let Some(log) = &mut self.outcome_log {
            log.push(o.clone());
        }
        Ok(())
    }

    pub fn totals(&self) -> Counts {
        self.totals
    }

    pub fn window(&self) -> Counts {
        self.window
    }

    pub fn mix(&self) -> ClassMix {
        self.mix
    }

    pub fn window_mix(&self) -> ClassMix {
        self.window_mix
    }

    pub fn in_flight(&self) -> u64 {
        self.totals.submitted - self.totals.finished()
    }

    pub fn series(&self) -> &[u64] {
        &self.series
    }

    pub fn histograms(&self) -> &BTreeMap<String, LatencyHistogram> {
        &self.histograms
    }

    pub fn window_write_bytes(&self) -> u64 {
        self.window_write_bytes
    }

    pub fn outcomes(&self) -> Option<&[Outcome]> {
        self.outcome_log.as_deref()
    }

    pub fn warmup(&self) -> SimTime {
        self.warmup
    }

    pub fn end(&self) -> SimTime {
        self.end
    }
}

/// Merges every histogram whose key starts with `prefix`.
pub fn merged_histogram<'a>(
    hists: impl IntoIterator<Item = (&'a String, &'a LatencyHistogram)>,
    prefix: &str,
) -> LatencyHistogram {
    let mut h = LatencyHistogram::new();
    for (k, v) in hists {
        if k.starts_with(prefix) {
            h.merge(v);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LogicTag, RegionId};
    use crate::protocols::{AbortReason, Verdict};
    use crate::time::{millis, secs};

    fn outcome(id: u64, verdict: Verdict, submit: SimTime, done: SimTime) -> Outcome {
        Outcome {
            txn_id: id,
            origin: RegionId(0),
            class: TxnClass {
                partition_span: PartitionSpan::SP,
                home_span: HomeSpan::LSH,
            },
            logic_tag: LogicTag::YcsbRw,
            read_only: false,
            verdict,
            submit_time: submit,
            commit_time: done,
            position: None,
        }
    }

    #[test]
    fn commit_latency_recorded() {
        let mut c = Collector::new(0, secs(10.0));
        c.record(&outcome(1, Verdict::Committed, 0, millis(42.0)), 10)
            .unwrap();
        let h = &c.histograms()["lsh/rw/ycsb-rw"];
        let p = h.percentile_ms(0.5).unwrap();
        assert!((42.0..=42.0 * 1.01).contains(&p));
        assert_eq!(c.series()[0], 1);
    }

    #[test]
    fn abort_leaves_series_untouched() {
        let mut c = Collector::new(0, secs(10.0));
        c.record(
            &outcome(1, Verdict::Aborted(AbortReason::Conflict), 0, millis(5.0)),
            0,
        )
        .unwrap();
        assert!(c.series().iter().all(|&x| x == 0));
        assert_eq!(c.totals().aborted, 1);
    }

    #[test]
    fn duplicate_outcome_is_error() {
        let mut c = Collector::new(0, secs(10.0));
        c.record(&outcome(1, Verdict::Committed, 0, 1), 0).unwrap();
        assert!(c.record(&outcome(1, Verdict::Committed, 0, 1), 0).is_err());
    }

    #[test]
    fn warmup_excluded_from_window() {
        let mut c = Collector::new(secs(1.0), secs(10.0));
        c.record(
            &outcome(1, Verdict::Committed, millis(10.0), millis(20.0)),
            0,
        )
        .unwrap();
        c.record(&outcome(2, Verdict::Committed, secs(2.0), secs(2.5)), 0)
            .unwrap();
        assert_eq!(c.totals().committed, 2);
        assert_eq!(c.window().committed, 1);
    }
}
