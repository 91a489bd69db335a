use proptest::prelude::*;
use proptest::sample::subsequence;

use sfenet::data::{make_splits, remove_baseline, EegtTensor, SplitPlan, SplitScheme, TensorData, Trial};
use sfenet::ensemble::{average_combine, vote, VoteMatrix};
use sfenet::fold::{fold_grid, FoldStrategy};
use sfenet::grid::Grid;
use sfenet::interp::{interpolate_cell, interpolate_grid, InterpParams};
use sfenet::montage::{FrameGrid, Montage};
use sfenet::nn::{softmax, softmax_xent};

fn grid9() -> impl Strategy<Value = Grid> {
    prop::collection::vec(-10.0f64..10.0, 81).prop_map(|v| Grid::from_vec(9, 9, v))
}

/// 9x9 frame whose non-electrode cells are zero.
fn frame9() -> impl Strategy<Value = FrameGrid> {
    (prop::collection::vec(any::<bool>(), 81), prop::collection::vec(0.1f64..5.0, 81), prop::collection::vec(any::<bool>(), 81))
        .prop_map(|(mask, mag, neg)| {
            let values = (0..81)
                .map(|i| if mask[i] { if neg[i] { -mag[i] } else { mag[i] } } else { 0.0 })
                .collect();
            FrameGrid {
                values: Grid::from_vec(9, 9, values),
                mask,
            }
        })
}

fn flip_frame(f: &FrameGrid, horizontal: bool) -> FrameGrid {
    let (h, w) = (f.height(), f.width());
    let src = |r: usize, c: usize| if horizontal { (r, w - 1 - c) } else { (h - 1 - r, c) };
    let values = Grid::from_fn(h, w, |r, c| f.values[src(r, c)]);
    let mask = (0..h * w)
        .map(|i| {
            let (r, c) = src(i / w, i % w);
            f.mask[r * w + c]
        })
        .collect();
    FrameGrid { values, mask }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn montage_round_trip_and_sum(values in prop::collection::vec(-100.0f64..100.0, 32), seed in any::<u64>()) {
        let m = Montage::deap32();
        let names = m.electrode_names();
        let mut channels: Vec<(String, f64)> = names.iter().cloned().zip(values.iter().copied()).collect();
        let frame = m.map_frame(&channels).unwrap();
        for (name, v) in &channels {
            let cell = m.placement(name).unwrap();
            prop_assert_eq!(frame.values[cell].to_bits(), v.to_bits());
        }
        let total: f64 = values.iter().sum();
        prop_assert!((frame.values.sum() - total).abs() <= 1e-9 * total.abs().max(1.0));

        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        channels.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(m.map_frame(&channels).unwrap(), frame);
    }

    #[test]
    fn interp_preserves_electrodes(frame in frame9()) {
        let out = interpolate_grid(&frame, &InterpParams::default());
        for i in 0..81 {
            if frame.mask[i] {
                prop_assert_eq!(out.values.as_slice()[i].to_bits(), frame.values.as_slice()[i].to_bits());
            }
        }
    }

    #[test]
    fn interp_is_mirror_equivariant(frame in frame9(), horizontal in any::<bool>()) {
        let p = InterpParams::default();
        let a = interpolate_grid(&flip_frame(&frame, horizontal), &p);
        let b = flip_frame(&interpolate_grid(&frame, &p), horizontal);
        for (x, y) in a.values.as_slice().iter().zip(b.values.as_slice()) {
            prop_assert!(close(*x, *y), "{} vs {}", x, y);
        }
    }

    #[test]
    fn interp_constant_field(mask in prop::collection::vec(any::<bool>(), 81), c in -5.0f64..5.0) {
        prop_assume!(c != 0.0 && mask.iter().any(|&m| m));
        let values = mask.iter().map(|&m| if m { c } else { 0.0 }).collect();
        let frame = FrameGrid { values: Grid::from_vec(9, 9, values), mask };
        let out = interpolate_grid(&frame, &InterpParams::default());
        for &v in out.values.as_slice() {
            prop_assert!(v == 0.0 || close(v, c), "{} vs {}", v, c);
        }
    }

    #[test]
    fn interp_is_bounded_by_what_it_reads(frame in frame9()) {
        let out = interpolate_grid(&frame, &InterpParams::default());
        for r in 0..9usize {
            for c in 0..9usize {
                if frame.mask[r * 9 + c] {
                    continue;
                }
                let mut read = Vec::new();
                for rr in r.saturating_sub(2)..(r + 3).min(9) {
                    for cc in c.saturating_sub(2)..(c + 3).min(9) {
                        if frame.mask[rr * 9 + cc] {
                            read.push(frame.values[(rr, cc)]);
                        }
                    }
                }
                let v = out.values[(r, c)];
                if read.is_empty() {
                    prop_assert_eq!(v, 0.0);
                    continue;
                }
                let lo = read.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = read.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{} outside [{}, {}]", v, lo, hi);
            }
        }
    }

    #[test]
    fn interp_ignores_traversal_order(frame in frame9(), order in Just((0..81usize).collect::<Vec<_>>()).prop_shuffle()) {
        let p = InterpParams::default();
        let expected = interpolate_grid(&frame, &p);
        let mut values = frame.values.clone();
        for i in order {
            let (r, c) = (i / 9, i % 9);
            if frame.mask[i] || frame.values[(r, c)] != 0.0 {
                continue;
            }
            if let Some(v) = interpolate_cell(&frame, (r, c), &p) {
                values[(r, c)] = v;
            }
        }
        prop_assert_eq!(values, expected.values);
    }

    #[test]
    fn fold_axis_duality_and_energy(g in grid9()) {
        let l = fold_grid(&g, FoldStrategy::LeftOnRight).unwrap();
        let r = fold_grid(&g, FoldStrategy::RightOnLeft).unwrap();
        let u = fold_grid(&g, FoldStrategy::TopOnBottom).unwrap();
        let d = fold_grid(&g, FoldStrategy::BottomOnTop).unwrap();
        let full = fold_grid(&g, FoldStrategy::FullMirror).unwrap();
        prop_assert_eq!(&l.layers[0], &r.layers[1]);
        prop_assert_eq!(&l.layers[1], &r.layers[0]);
        prop_assert_eq!(&u.layers[0], &d.layers[1]);
        prop_assert_eq!(&u.layers[1], &d.layers[0]);
        for i in 0..9 {
            prop_assert_eq!(l.layers[0][(i, 0)], l.layers[1][(i, 0)]);
            prop_assert_eq!(u.layers[0][(0, i)], u.layers[1][(0, i)]);
        }
        let center_col: f64 = (0..9).map(|i| g[(i, 4)]).sum();
        let center_row: f64 = (0..9).map(|i| g[(4, i)]).sum();
        let tol = 1e-9;
        prop_assert!((l.sum() - (g.sum() + center_col)).abs() < tol);
        prop_assert!((r.sum() - (g.sum() + center_col)).abs() < tol);
        prop_assert!((u.sum() - (g.sum() + center_row)).abs() < tol);
        prop_assert!((d.sum() - (g.sum() + center_row)).abs() < tol);
        prop_assert!((full.sum() - 2.0 * g.sum()).abs() < tol);
    }

    #[test]
    fn vote_monotone_toward_winner(classes in 2usize..6, preds in prop::collection::vec(0usize..6, 1..12)) {
        let preds: Vec<usize> = preds.into_iter().map(|p| p % classes).collect();
        let winner = vote(&VoteMatrix::from_votes(classes, &preds).unwrap()).unwrap();
        for i in 0..preds.len() {
            let mut flipped = preds.clone();
            flipped[i] = winner;
            prop_assert_eq!(vote(&VoteMatrix::from_votes(classes, &flipped).unwrap()).unwrap(), winner);
        }
    }

    #[test]
    fn vote_and_average_agree_on_identical_one_hots(classes in 2usize..6, j in 0usize..6, members in 1usize..8) {
        let j = j % classes;
        let mut row = vec![0.0; classes];
        row[j] = 1.0;
        let rows = vec![row; members];
        prop_assert_eq!(vote(&VoteMatrix::new(rows.clone(), None).unwrap()).unwrap(), j);
        prop_assert_eq!(average_combine(&rows).unwrap(), j);
    }

    #[test]
    fn vote_ignores_member_order(probs in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..8),
                                 order in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle()) {
        let rows: Vec<Vec<f64>> = probs.iter().map(|r| { let s: f64 = r.iter().sum(); r.iter().map(|v| v / s).collect() }).collect();
        let order: Vec<usize> = order.into_iter().filter(|&k| k < rows.len()).collect();
        let m = VoteMatrix::from_probabilities(rows.clone()).unwrap();
        prop_assert_eq!(vote(&m.permuted(&order)).unwrap(), vote(&m).unwrap());
        let permuted: Vec<Vec<f64>> = order.iter().map(|&k| rows[k].clone()).collect();
        prop_assert_eq!(average_combine(&permuted).unwrap(), average_combine(&rows).unwrap());
    }

    #[test]
    fn softmax_sums_to_one(logits in prop::collection::vec(-80.0f64..80.0, 2..10), label in 0usize..10) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let (loss, grad) = softmax_xent(&logits, label % logits.len()).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert!(grad.iter().sum::<f64>().abs() <= 1e-12);
    }

    #[test]
    fn splits_are_disjoint_and_kfold_partitions(
        (k, labels) in (2usize..6).prop_flat_map(|k| {
            let labels = prop::collection::vec(k..20usize, 1..4)
                .prop_map(|counts| counts.iter().enumerate().flat_map(|(c, &n)| vec![c; n]).collect::<Vec<_>>());
            (Just(k), labels.prop_shuffle())
        }),
        seed in any::<u64>(),
    ) {
        let subjects = vec!["s"; labels.len()];
        let plan = SplitPlan { scheme: SplitScheme::KFold, k, seed, ..SplitPlan::default() };
        let splits = make_splits(&labels, &subjects, &plan).unwrap();
        let mut seen = vec![0usize; labels.len()];
        for s in &splits {
            prop_assert!(s.train.iter().all(|i| !s.test.contains(i)));
            prop_assert_eq!(s.train.len() + s.test.len(), labels.len());
            for &i in &s.test {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
        prop_assert_eq!(make_splits(&labels, &subjects, &plan).unwrap(), splits);
    }

    #[test]
    fn baseline_removal_matches_naive(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 12), 1..4)) {
        let channels = rows.len();
        let trial = Trial::from_vec(channels, 12, rows.concat());
        let out = remove_baseline(&trial, 1.0, 2.0, 4.0).unwrap();
        for ch in 0..channels {
            let mut mean = 0.0;
            for t in 0..4 {
                mean += rows[ch][t];
            }
            mean /= 4.0;
            for t in 0..8 {
                prop_assert_eq!(out.get(ch, t), rows[ch][4 + t] - mean);
            }
        }
    }

    #[test]
    fn eegt_round_trip(dims in prop::collection::vec(1usize..5, 1..4), bits in prop::collection::vec(any::<u64>(), 64), wide in any::<bool>()) {
        let n: usize = dims.iter().product();
        let t = if wide {
            EegtTensor::from_f64(dims.clone(), bits[..n].iter().map(|&b| f64::from_bits(b)).collect()).unwrap()
        } else {
            EegtTensor::from_f32(dims.clone(), bits[..n].iter().map(|&b| f32::from_bits(b as u32)).collect()).unwrap()
        };
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = EegtTensor::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.dims(), t.dims());
        let to_bits = |d: &TensorData| -> Vec<u64> {
            match d {
                TensorData::F64(v) => v.iter().map(|x| x.to_bits()).collect(),
                TensorData::F32(v) => v.iter().map(|x| x.to_bits() as u64).collect(),
            }
        };
        prop_assert_eq!(to_bits(back.data()), to_bits(t.data()));
    }

    #[test]
    fn montage_subset_masks_only_kept_names(picks in subsequence((0..32usize).collect::<Vec<_>>(), 1..32)) {
        let full = Montage::deap32();
        let names: Vec<String> = picks.iter().map(|&i| full.electrode_names()[i].clone()).collect();
        let sub = full.restrict(&names).unwrap();
        prop_assert_eq!(sub.len(), names.len());
        prop_assert_eq!(sub.mask().iter().filter(|&&m| m).count(), names.len());
        for n in &names {
            prop_assert_eq!(sub.placement(n), full.placement(n));
        }
    }
}
