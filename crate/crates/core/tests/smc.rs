mod common;

use std::collections::BTreeMap;

use common::*;
use emopp::analysis::*;
use emopp::corpus::BreakSequence;
use proptest::prelude::*;

type Entry = (String, String, usize, BreakSequence);

const LABELS: [&str; 5] = ["neutral", "happy", "angry", "sad", "surprise"];

/// Random table entries: each (speaker, text) group has one length shared by
/// a random subset of emotions.
fn arb_entries() -> impl Strategy<Value = Vec<Entry>> {
    prop::collection::vec(
        (0u8..3, 0u8..4, 1usize..8, prop::collection::vec(any::<bool>(), 5), any::<u64>()),
        1..10,
    )
    .prop_map(|groups| {
        let mut seen = std::collections::BTreeSet::new();
        let mut entries = Vec::new();
        for (spk, txt, len, present, bits) in groups {
            if !seen.insert((spk, txt)) {
                continue;
            }
            for (e, _) in present.iter().enumerate().filter(|(_, p)| **p) {
                let flags = (0..len).map(|k| (bits >> ((e * 8 + k) % 64)) & 1 == 1);
                entries.push((format!("s{spk}"), format!("t{txt}"), e, BreakSequence::from_flags(flags)));
            }
        }
        entries
    })
}

fn table_of(entries: &[Entry]) -> EmotionBreakTable {
    let mut t = EmotionBreakTable::new();
    for (s, x, e, b) in entries {
        t.insert(s.clone(), x.clone(), emo(LABELS[*e]), b.clone()).unwrap();
    }
    t
}

/// Double loop over emotion pairs and groups, counting agreements by hand.
fn oracle(entries: &[Entry]) -> BTreeMap<(usize, usize), (f64, usize)> {
    let mut groups: BTreeMap<(String, String), BTreeMap<usize, &BreakSequence>> = BTreeMap::new();
    for (s, x, e, b) in entries {
        groups.entry((s.clone(), x.clone())).or_default().insert(*e, b);
    }
    let mut out = BTreeMap::new();
    for i in 0..5 {
        for j in 0..5 {
            let (mut sum, mut n) = (0.0, 0);
            for g in groups.values() {
                if let (Some(a), Some(b)) = (g.get(&i), g.get(&j)) {
                    let mut agree = 0;
                    for k in 0..a.len() {
                        if a.labels()[k] == b.labels()[k] {
                            agree += 1;
                        }
                    }
                    sum += agree as f64 / a.len() as f64;
                    n += 1;
                }
            }
            if n > 0 {
                out.insert((i, j), (sum / n as f64, n));
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn matrix_matches_double_loop_oracle(entries in arb_entries()) {
        prop_assume!(!entries.is_empty());
        let m = smc_matrix(&table_of(&entries), SmcOptions::default()).unwrap();
        let expected = oracle(&entries);
        for (a, la) in m.labels.iter().enumerate() {
            let i = LABELS.iter().position(|l| *l == la.as_str()).unwrap();
            for (b, lb) in m.labels.iter().enumerate() {
                let j = LABELS.iter().position(|l| *l == lb.as_str()).unwrap();
                match expected.get(&(i, j)) {
                    Some(&(v, n)) => {
                        prop_assert_eq!(m.values[a][b], Some(v));
                        prop_assert_eq!(m.counts[a][b], n);
                    }
                    None => prop_assert_eq!(m.values[a][b], None),
                }
            }
        }
    }

    #[test]
    fn matrix_is_symmetric_bounded_with_unit_diagonal(entries in arb_entries()) {
        prop_assume!(!entries.is_empty());
        let m = smc_matrix(&table_of(&entries), SmcOptions::default()).unwrap();
        for i in 0..m.labels.len() {
            prop_assert_eq!(m.values[i][i], Some(1.0));
            for j in 0..m.labels.len() {
                prop_assert_eq!(m.values[i][j], m.values[j][i]);
                if let Some(v) = m.values[i][j] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}

#[test]
fn mismatched_group_is_error_or_skipped() {
    let mut t = EmotionBreakTable::new();
    t.insert("s", "a b", emo("happy"), seq(&[1, 0])).unwrap();
    t.insert("s", "a b", emo("sad"), seq(&[1, 0, 0])).unwrap();
    t.insert("s", "c d", emo("happy"), seq(&[0, 0])).unwrap();
    t.insert("s", "c d", emo("sad"), seq(&[1, 0])).unwrap();
    assert!(smc_matrix(&t, SmcOptions::default()).is_err());
    let m = smc_matrix(&t, SmcOptions { skip_mismatched: true }).unwrap();
    assert_eq!(m.skipped_groups, 1);
    assert_eq!(m.values[0][1], Some(0.5));
}

#[test]
fn identical_breaks_give_all_ones_csv() {
    let mut t = EmotionBreakTable::new();
    for e in ["neutral", "sad"] {
        t.insert("s", "x y z", emo(e), seq(&[1, 0, 0])).unwrap();
    }
    let m = smc_matrix(&t, SmcOptions::default()).unwrap();
    let csv = render_smc_report(&m, ReportFormat::Csv).unwrap();
    assert_eq!(csv, ",neutral,sad\nneutral,1.00,1.00\nsad,-,1.00\n");
}
