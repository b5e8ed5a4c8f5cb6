use freelens::chaos::{self, flatten, ChaosTensor, FlatteningSpec};
use proptest::prelude::*;

fn tensor_strategy() -> impl Strategy<Value = ChaosTensor> {
    (1usize..4, 1usize..4, 1usize..3, 1usize..4).prop_flat_map(|(q, m, d1, d2)| {
        let ranges: Vec<usize> = std::iter::repeat_n(m, q).chain([d1, d2]).collect();
        let idx = ranges.iter().map(|&r| 0..r).collect::<Vec<_>>();
        prop::collection::btree_map(idx, -2.0..2.0f64, 1..12).prop_map(move |map| {
            ChaosTensor::from_entries(q, m, d1, d2, map.into_iter().collect()).unwrap()
        })
    })
}

/// Swaps chaos coordinates `a` and `b` (1-based).
fn swap_coords(t: &ChaosTensor, a: usize, b: usize) -> ChaosTensor {
    let (d1, d2) = t.dims();
    let entries = t
        .entries()
        .iter()
        .map(|(idx, &v)| {
            let mut i = idx.clone();
            i.swap(a - 1, b - 1);
            (i, v)
        })
        .collect();
    ChaosTensor::from_entries(t.q(), t.m(), d1, d2, entries).unwrap()
}

proptest! {
    #[test]
    fn transpose_duality(t in tensor_strategy(), mask in 0u64..32) {
        let q = t.q();
        let rows: Vec<usize> = (1..=q + 2).filter(|c| mask >> (c - 1) & 1 == 1).collect();
        let cols: Vec<usize> = (1..=q + 2).filter(|c| mask >> (c - 1) & 1 == 0).collect();
        let spec = FlatteningSpec::new(rows, cols, q).unwrap();
        prop_assert_eq!(flatten(&t, &spec).unwrap(), flatten(&t, &spec.transposed()).unwrap().transpose());
    }

    #[test]
    fn relabeling_equivariance(t in tensor_strategy()) {
        prop_assume!(t.q() >= 2);
        let s = swap_coords(&t, 1, 2);
        prop_assert!((chaos::sigma_chaos(&t) - chaos::sigma_chaos(&s)).abs() < 1e-10);
        prop_assert!((chaos::v_chaos(&t) - chaos::v_chaos(&s)).abs() < 1e-10);
    }

    #[test]
    fn json_roundtrip(t in tensor_strategy()) {
        prop_assert_eq!(chaos::tensor_from_json(&chaos::tensor_to_json(&t)).unwrap(), t);
    }
}
