use std::collections::{BTreeMap, HashMap, HashSet};

use super::{CommitPosition, Outcome, ProtocolModel};
use crate::error::{Error, Result};
use crate::model::{Key, PartitionId, PlacementMap, ServerId, Topology, Transaction, TxnId, Value};

/// Applies committed transactions one at a time in position order (ties
/// broken by id) over `initial` and returns the final contents.
pub fn replay<'a>(
    entries: impl IntoIterator<Item = (CommitPosition, &'a Transaction)>,
    initial: &BTreeMap<Key, Value>,
) -> Result<BTreeMap<Key, Value>> {
    let mut order: Vec<(CommitPosition, &Transaction)> = entries.into_iter().collect();
    order.sort_by_key(|(p, t)| (*p, t.id));
    let mut seen = HashSet::new();
    for w in order.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Engine(format!(
                "txns {} and {} share commit position {:?}",
                w[0].1.id, w[1].1.id, w[0].0
            )));
        }
    }
    let mut state = initial.clone();
    for (_, t) in order {
        if !seen.insert(t.id) {
            return Err(Error::Engine(format!("txn {} replayed twice", t.id)));
        }
        for (k, v) in &t.write_set {
            state.insert(*k, *v);
        }
    }
    Ok(state)
}

/// Replays client outcomes; every outcome must be a commit with a position.
pub fn replay_outcomes(
    outcomes: &[Outcome],
    txns: &HashMap<TxnId, Transaction>,
    initial: &BTreeMap<Key, Value>,
) -> Result<BTreeMap<Key, Value>> {
    let mut entries = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let pos = match (o.verdict.is_committed(), o.position) {
            (true, Some(p)) => p,
            _ => {
                return Err(Error::Engine(format!(
                    "txn {} in replay order is not committed",
                    o.txn_id
                )));
            }
        };
        let t = txns
            .get(&o.txn_id)
            .ok_or_else(|| Error::Engine(format!("txn {} missing from the stream", o.txn_id)))?;
        entries.push((pos, t));
    }
    replay(entries, initial)
}

/// Servers holding a copy of `p`: the home copy first, then replicas.
pub fn hosted_servers(
    topo: &Topology,
    placement: &PlacementMap,
    p: PartitionId,
) -> Result<Vec<ServerId>> {
    let mut v = vec![topo.home_server(p, placement)?];
    for r in placement.replicas(p)? {
        v.push(topo.server_for(p, *r));
    }
    Ok(v)
}

/// Checks every copy of every partition against `expected`. With
/// `homes_only`, replicas are skipped.
pub fn check_copies(
    protocol: &dyn ProtocolModel,
    topo: &Topology,
    placement: &PlacementMap,
    expected: &BTreeMap<Key, Value>,
    homes_only: bool,
) -> Result<()> {
    let mut by_partition: BTreeMap<PartitionId, BTreeMap<Key, Value>> = BTreeMap::new();
    for (k, v) in expected {
        by_partition.entry(k.partition).or_default().insert(*k, *v);
    }
    let empty = BTreeMap::new();
    for p in 0..placement.partitions() {
        let p = PartitionId(p);
        let want = by_partition.get(&p).unwrap_or(&empty);
        let servers = hosted_servers(topo, placement, p)?;
        let take = if homes_only { 1 } else { servers.len() };
        for s in servers.into_iter().take(take) {
            let store = protocol.store(s).ok_or_else(|| {
                Error::Engine(format!("{} keeps no store at {s}", protocol.name()))
            })?;
            let got: BTreeMap<Key, Value> = store
                .partition(p)
                .into_iter()
                .map(|(k, v, _)| (k, v))
                .collect();
            if &got != want {
                let diff = want
                    .iter()
                    .find(|(k, v)| got.get(k) != Some(v))
                    .map(|(k, _)| *k)
                    .or_else(|| got.keys().find(|k| !want.contains_key(k)).copied());
                return Err(Error::Engine(format!(
                    "{} copy of partition {} at {s} diverges from the serial order (first key {diff:?}; {} vs {} keys)",
                    protocol.name(),
                    p.0,
                    got.len(),
                    want.len()
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LogicTag, RegionId};
    use crate::protocols::{Outcome, Verdict};

    fn txn(id: u64, writes: &[(u32, u64, u64)]) -> Transaction {
        let mut t = Transaction::new(id, RegionId(0), LogicTag::Custom);
        for &(p, r, seed) in writes {
            t.write_set.insert(Key::new(p, r), Value { seed, len: 4 });
        }
        t
    }

    #[test]
    fn empty_replay_is_initial() {
        let mut init = BTreeMap::new();
        init.insert(Key::new(0, 1), Value { seed: 9, len: 1 });
        assert_eq!(replay(std::iter::empty(), &init).unwrap(), init);
    }

    #[test]
    fn later_position_wins() {
        let a = txn(1, &[(0, 1, 10)]);
        let b = txn(2, &[(0, 1, 20)]);
        let s = replay(
            [
                (CommitPosition::new(5, 0), &a),
                (CommitPosition::new(3, 0), &b),
            ],
            &BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(s[&Key::new(0, 1)].seed, 10);
    }

    #[test]
    fn shared_position_is_error() {
        let a = txn(1, &[(0, 1, 10)]);
        let b = txn(2, &[(0, 1, 20)]);
        let p = CommitPosition::new(1, 1);
        assert!(replay([(p, &a), (p, &b)], &BTreeMap::new()).is_err());
    }

    #[test]
    fn uncommitted_outcome_rejected() {
        use crate::model::{HomeSpan, PartitionSpan, TxnClass};
        let o = Outcome {
            txn_id: 1,
            origin: RegionId(0),
            class: TxnClass {
                partition_span: PartitionSpan::SP,
                home_span: HomeSpan::LSH,
            },
            logic_tag: LogicTag::Custom,
            read_only: false,
            verdict: Verdict::Aborted(crate::protocols::AbortReason::Conflict),
            submit_time: 0,
            commit_time: 1,
            position: None,
        };
        let mut txns = HashMap::new();
        txns.insert(1, txn(1, &[(0, 1, 1)]));
        assert!(replay_outcomes(&[o], &txns, &BTreeMap::new()).is_err());
    }
}
