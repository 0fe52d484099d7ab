use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TxRecord;

/// All transfers between one unordered address pair, collapsed into a
/// single edge.
///
/// `endpoints.0 < endpoints.1` lexicographically; "out" is the direction
/// `endpoints.0 -> endpoints.1`, "in" the reverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedEdge {
    pub endpoints: (String, String),
    pub amount_out: f64,
    pub amount_in: f64,
    pub count_out: usize,
    pub count_in: usize,
    /// Mean over all contributing records, both directions pooled.
    pub mean_timestamp: f64,
    pub record_count: usize,
}

impl MergedEdge {
    pub fn other(&self, addr: &str) -> &str {
        if self.endpoints.0 == addr {
            &self.endpoints.1
        } else {
            &self.endpoints.0
        }
    }

    /// Total amount sent by `addr` over this edge.
    pub fn sent_by(&self, addr: &str) -> f64 {
        if self.endpoints.0 == addr {
            self.amount_out
        } else {
            self.amount_in
        }
    }

    pub fn received_by(&self, addr: &str) -> f64 {
        if self.endpoints.0 == addr {
            self.amount_in
        } else {
            self.amount_out
        }
    }

    /// Number of records sent by `addr`.
    pub fn sends_from(&self, addr: &str) -> usize {
        if self.endpoints.0 == addr {
            self.count_out
        } else {
            self.count_in
        }
    }

    pub fn sends_to(&self, addr: &str) -> usize {
        if self.endpoints.0 == addr {
            self.count_in
        } else {
            self.count_out
        }
    }

    /// Larger of the two directional totals.
    pub fn max_amount(&self) -> f64 {
        self.amount_out.max(self.amount_in)
    }
}

pub type MergedEdges = BTreeMap<(String, String), MergedEdge>;

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Collapses multi-edges: one entry per unordered pair, amounts summed per
/// direction in record order and timestamps averaged over every record.
pub fn merge_multi_edges(records: &[TxRecord]) -> MergedEdges {
    let mut acc: BTreeMap<(String, String), (MergedEdge, i128)> = BTreeMap::new();
    for r in records {
        let key = pair_key(&r.from_addr, &r.to_addr);
        let forward = key.0 == r.from_addr;
        let (edge, ts_sum) = acc.entry(key.clone()).or_insert_with(|| {
            (
                MergedEdge {
                    endpoints: key,
                    amount_out: 0.0,
                    amount_in: 0.0,
                    count_out: 0,
                    count_in: 0,
                    mean_timestamp: 0.0,
                    record_count: 0,
                },
                0,
            )
        });
        if forward {
            edge.amount_out += r.amount;
            edge.count_out += 1;
        } else {
            edge.amount_in += r.amount;
            edge.count_in += 1;
        }
        edge.record_count += 1;
        *ts_sum += i128::from(r.timestamp);
    }
    acc.into_iter()
        .map(|(k, (mut edge, ts_sum))| {
            edge.mean_timestamp = ts_sum as f64 / edge.record_count as f64;
            (k, edge)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton() {
        let m = merge_multi_edges(&[TxRecord::new("a", "b", 1.5, 100)]);
        let e = &m[&("a".into(), "b".into())];
        assert_eq!((e.amount_out, e.amount_in), (1.5, 0.0));
        assert_eq!(e.mean_timestamp, 100.0);
        assert_eq!(e.record_count, 1);
    }

    #[test]
    fn same_direction() {
        let m = merge_multi_edges(&[TxRecord::new("a", "b", 1.0, 100), TxRecord::new("a", "b", 2.0, 200)]);
        assert_eq!(m.len(), 1);
        let e = &m[&("a".into(), "b".into())];
        assert_eq!(e.amount_out, 3.0);
        assert_eq!(e.mean_timestamp, 150.0);
        assert_eq!(e.record_count, 2);
    }

    #[test]
    fn both_directions() {
        let m = merge_multi_edges(&[TxRecord::new("a", "b", 1.0, 100), TxRecord::new("b", "a", 4.0, 300)]);
        assert_eq!(m.len(), 1);
        let e = &m[&("a".into(), "b".into())];
        assert_eq!(e.sent_by("a"), 1.0);
        assert_eq!(e.sent_by("b"), 4.0);
        assert_eq!(e.received_by("a"), 4.0);
        assert_eq!(e.mean_timestamp, 200.0);
        assert_eq!(e.record_count, 2);
        assert_eq!((e.sends_from("b"), e.sends_to("b")), (1, 1));
        assert_eq!(e.other("b"), "a");
    }

    #[test]
    fn key_order_independent_of_record_direction() {
        let m = merge_multi_edges(&[TxRecord::new("z", "a", 2.0, 10)]);
        let e = &m[&("a".into(), "z".into())];
        assert_eq!((e.amount_out, e.amount_in), (0.0, 2.0));
    }
}
