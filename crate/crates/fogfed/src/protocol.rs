//! Federated-averaging aggregation and the messages exchanged between fog
//! nodes and the cloud aggregator.

use crate::error::{Error, Result};
use crate::nn::params::ModelParams;

/// One fog node's contribution to a round: its locally trained parameters
/// plus the sample count that weights them. Raw frames never appear here —
/// parameters and counts are all that crosses the fog→cloud boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelUpdate {
    pub round_id: u32,
    pub fog_id: u32,
    /// Number of frames in the trained window (the round's |D_i|).
    pub sample_count: u64,
    pub params: ModelParams,
    /// Mean cross-entropy over the window under the returned params.
    pub local_loss: f32,
}

/// The cloud's aggregated model; `round_id` counts completed aggregations.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub round_id: u32,
    pub params: ModelParams,
}

/// Sample-count-weighted federated average:
///
/// ```text
/// out = Σ_i (n_i / Σ_j n_j) · params_i
/// ```
///
/// applied elementwise per parameter array. Accumulation runs in f64 over
/// updates sorted by `fog_id` ascending, so the result is independent of the
/// caller's argument order (bit-exactly so for distinct fog ids), a single
/// update comes back bit-exactly, and every output entry stays inside the
/// convex hull of the input entries.
pub fn aggregate(updates: &[ModelUpdate]) -> Result<ModelParams> {
    if updates.is_empty() {
        return Err(Error::InvalidArgument(
            "aggregate needs at least one update".into(),
        ));
    }
    let round_id = updates[0].round_id;
    let dims = updates[0].params.dims();
    let mut total: u64 = 0;
    for u in updates {
        if u.round_id != round_id {
            return Err(Error::Protocol(format!(
                "mixed round ids: fog {} sent round {}, expected {round_id}",
                u.fog_id, u.round_id
            )));
        }
        if u.params.dims() != dims {
            return Err(Error::Protocol(format!(
                "fog {} sent params of shape {:?}, expected {dims:?}",
                u.fog_id,
                u.params.dims()
            )));
        }
        if u.sample_count == 0 {
            return Err(Error::InvalidArgument(format!(
                "fog {} reports zero samples",
                u.fog_id
            )));
        }
        if !u.params.all_finite() {
            return Err(Error::InvalidValue(format!(
                "fog {} sent non-finite parameters",
                u.fog_id
            )));
        }
        total = total.checked_add(u.sample_count).ok_or_else(|| {
            Error::InvalidArgument("sample counts overflow u64".into())
        })?;
    }

    let mut order: Vec<usize> = (0..updates.len()).collect();
    order.sort_by_key(|&i| updates[i].fog_id);

    let mut acc: [Vec<f64>; 4] = [
        vec![0.0; dims.input * dims.hidden],
        vec![0.0; dims.hidden],
        vec![0.0; dims.hidden * dims.output],
        vec![0.0; dims.output],
    ];
    for &i in &order {
        let u = &updates[i];
        let w = u.sample_count as f64 / total as f64;
        for (acc_block, src_block) in acc.iter_mut().zip(u.params.blocks()) {
            for (a, &p) in acc_block.iter_mut().zip(src_block) {
                *a += w * f64::from(p);
            }
        }
    }

    let [w1, b1, w2, b2] = acc;
    let cast = |v: Vec<f64>| v.into_iter().map(|x| x as f32).collect();
    ModelParams::from_tensors(cast(w1), cast(b1), cast(w2), cast(b2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{init_params, Dims};
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn scalar_update(fog_id: u32, w: f32, n: u64) -> ModelUpdate {
        ModelUpdate {
            round_id: 0,
            fog_id,
            sample_count: n,
            params: ModelParams::from_tensors(vec![w], vec![0.0], vec![0.0], vec![0.0]).unwrap(),
            local_loss: 0.0,
        }
    }

    fn random_update(fog_id: u32, dims: Dims, n: u64, seed: u64) -> ModelUpdate {
        ModelUpdate {
            round_id: 0,
            fog_id,
            sample_count: n,
            params: init_params(seed, dims).unwrap(),
            local_loss: 0.1,
        }
    }

    #[test]
    fn single_update_is_identity_bit_exact() {
        let u = random_update(3, Dims::new(6, 4, 3), 60, 17);
        let out = aggregate(std::slice::from_ref(&u)).unwrap();
        assert!(out.bitwise_eq(&u.params));
    }

    #[test]
    fn identical_params_aggregate_to_themselves() {
        let base = init_params(5, Dims::new(6, 4, 3)).unwrap();
        let updates: Vec<ModelUpdate> = [(0u32, 10u64), (1, 60), (2, 7)]
            .iter()
            .map(|&(fog_id, n)| ModelUpdate {
                round_id: 0,
                fog_id,
                sample_count: n,
                params: base.clone(),
                local_loss: 0.0,
            })
            .collect();
        let out = aggregate(&updates).unwrap();
        assert!(out.bitwise_eq(&base));
    }

    #[test]
    fn equal_weight_mean_of_two_scalars() {
        let out = aggregate(&[scalar_update(0, 2.0, 60), scalar_update(1, 4.0, 60)]).unwrap();
        assert_eq!(out.w1().get(0, 0), 3.0);
    }

    #[test]
    fn hand_computed_weighted_mean() {
        // (20*0 + 60*4) / 80 = 3.0
        let out = aggregate(&[scalar_update(0, 0.0, 20), scalar_update(1, 4.0, 60)]).unwrap();
        assert_eq!(out.w1().get(0, 0), 3.0);
    }

    #[test]
    fn matches_brute_force_oracle_on_random_cases() {
        let mut rng = seeded_rng(404);
        for case in 0..25 {
            let dims = Dims::new(
                rng.random_range(1..5),
                rng.random_range(1..4),
                rng.random_range(1..4),
            );
            let k = rng.random_range(1..6);
            let updates: Vec<ModelUpdate> = (0..k)
                .map(|i| random_update(i, dims, rng.random_range(1..100), u64::from(i) + case * 31))
                .collect();
            let out = aggregate(&updates).unwrap();

            // Independent oracle: sum n_i * p first, divide by total last.
            // The implementation stores f32, so agreement is bounded by the
            // final rounding step (half an f32 ulp), not by the f64 math.
            let total: f64 = updates.iter().map(|u| u.sample_count as f64).sum();
            for block in 0..4 {
                for j in 0..out.blocks()[block].len() {
                    let expected: f64 = updates
                        .iter()
                        .map(|u| u.sample_count as f64 * f64::from(u.params.blocks()[block][j]))
                        .sum::<f64>()
                        / total;
                    let got = f64::from(out.blocks()[block][j]);
                    let f32_ulp = f64::from(f32::EPSILON) * expected.abs().max(1.0);
                    assert!(
                        (got - expected).abs() <= f32_ulp,
                        "case {case} block {block} idx {j}: {got} vs {expected}"
                    );
                }
            }
        }
    }

    #[test]
    fn argument_order_does_not_matter() {
        let updates: Vec<ModelUpdate> = (0..5)
            .map(|i| random_update(i, Dims::new(4, 3, 2), u64::from(i) * 13 + 1, u64::from(i)))
            .collect();
        let forward = aggregate(&updates).unwrap();
        let mut reversed = updates.clone();
        reversed.reverse();
        let backward = aggregate(&reversed).unwrap();
        assert!(forward.bitwise_eq(&backward));

        let mut rotated = updates;
        rotated.rotate_left(2);
        assert!(aggregate(&rotated).unwrap().bitwise_eq(&forward));
    }

    #[test]
    fn scaling_all_counts_changes_nothing() {
        let updates: Vec<ModelUpdate> = (0..4)
            .map(|i| random_update(i, Dims::new(3, 3, 2), u64::from(i) + 1, u64::from(i) + 50))
            .collect();
        let base = aggregate(&updates).unwrap();
        for factor in [2u64, 7, 1000] {
            let scaled: Vec<ModelUpdate> = updates
                .iter()
                .map(|u| ModelUpdate {
                    sample_count: u.sample_count * factor,
                    ..u.clone()
                })
                .collect();
            assert!(aggregate(&scaled).unwrap().bitwise_eq(&base), "factor {factor}");
        }
    }

    #[test]
    fn output_stays_inside_the_convex_hull() {
        let updates: Vec<ModelUpdate> = (0..6)
            .map(|i| random_update(i, Dims::new(5, 4, 3), u64::from(i) * 7 + 3, u64::from(i) + 90))
            .collect();
        let out = aggregate(&updates).unwrap();
        for block in 0..4 {
            for j in 0..out.blocks()[block].len() {
                let lo = updates
                    .iter()
                    .map(|u| u.params.blocks()[block][j])
                    .fold(f32::INFINITY, f32::min);
                let hi = updates
                    .iter()
                    .map(|u| u.params.blocks()[block][j])
                    .fold(f32::NEG_INFINITY, f32::max);
                let v = out.blocks()[block][j];
                assert!(v >= lo && v <= hi, "block {block} idx {j}: {v} outside [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn inconsistent_updates_are_rejected() {
        assert!(matches!(aggregate(&[]), Err(Error::InvalidArgument(_))));

        let a = random_update(0, Dims::new(3, 2, 2), 10, 1);
        let mut b = random_update(1, Dims::new(3, 2, 2), 10, 2);
        b.round_id = 1;
        assert!(matches!(
            aggregate(&[a.clone(), b]),
            Err(Error::Protocol(_))
        ));

        let c = random_update(1, Dims::new(4, 2, 2), 10, 2);
        assert!(matches!(
            aggregate(&[a.clone(), c]),
            Err(Error::Protocol(_))
        ));

        let mut d = random_update(1, Dims::new(3, 2, 2), 10, 2);
        d.sample_count = 0;
        assert!(matches!(
            aggregate(&[a, d]),
            Err(Error::InvalidArgument(_))
        ));
    }
}
