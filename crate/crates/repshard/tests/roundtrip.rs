// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use repshard::cli::Range;
use repshard::core::shard::InputCountDistribution;
use repshard::core::sim::{synthetic_tx_id, TraceRecord};
use repshard::formats::{read_input_distribution, read_trace, write_input_distribution, write_trace};

proptest! {
    #[test]
    fn trace_survives_a_round_trip(
        rows in prop::collection::vec((1u64..50, 1usize..=12, any::<bool>(), any::<u64>()), 0..60)
    ) {
        let mut records: Vec<TraceRecord> = rows
            .into_iter()
            .map(|(round, n_inputs, valid, seed)| TraceRecord { round, tx_id: synthetic_tx_id(seed, 0), n_inputs, valid })
            .collect();
        records.sort_by_key(|r| r.round);
        let file = tempfile::NamedTempFile::new().unwrap();
        write_trace(&records, file.reopen().unwrap()).unwrap();
        prop_assert_eq!(read_trace(file.path()).unwrap(), records);
    }

    #[test]
    fn distribution_survives_a_round_trip(weights in prop::collection::vec(0.01f64..1.0, 1..=12)) {
        let total: f64 = weights.iter().sum();
        let dist = InputCountDistribution::new(weights.iter().map(|w| w / total).collect()).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_input_distribution(&dist, file.reopen().unwrap()).unwrap();
        let back = read_input_distribution(file.path()).unwrap();
        for ((k, p), (k2, q)) in dist.pairs().zip(back.pairs()) {
            prop_assert_eq!(k, k2);
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn integer_ranges_are_inclusive_and_stepped(min in 0u64..100, span in 0u64..100, step in 1u64..20) {
        let r: Range<u64> = format!("{min}:{}:{step}", min + span).parse().unwrap();
        let values = r.values("x").unwrap();
        prop_assert_eq!(values[0], min);
        prop_assert!(values.iter().all(|&v| v <= min + span && (v - min) % step == 0));
        prop_assert!(values.last().unwrap() + step > min + span);
    }
}
