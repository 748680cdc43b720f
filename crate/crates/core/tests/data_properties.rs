use mmfed_core::data::{
    apply_test_modality_mix, class_histogram, generate_synthetic, partition_clients, split_train_test,
    stratified_folds, Instance, InstanceKind, ModalityCounts, PartitionSpec, SplitReading, SyntheticSpec,
};
use proptest::prelude::*;

fn dataset(seed: u64) -> Vec<Instance> {
    generate_synthetic(&SyntheticSpec {
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn key(i: &Instance) -> Vec<u64> {
    let mut k: Vec<u64> = i.pet.iter().chain(i.mri.iter()).flatten().map(|v| v.to_bits()).collect();
    k.push(i.label as u64);
    k
}

fn type_counts(data: &[Instance]) -> [usize; 3] {
    let mut c = [0; 3];
    for i in data {
        c[match i.kind().unwrap() {
            InstanceKind::PetOnly => 0,
            InstanceKind::MriOnly => 1,
            InstanceKind::Multimodal => 2,
        }] += 1;
    }
    c
}

#[test]
fn folds_are_stratified_and_sized() {
    let data = dataset(1);
    let hist = class_histogram(&data, 3);
    let folds = stratified_folds(&data, 5, 9).unwrap();
    let mut seen = vec![0; data.len()];
    for f in &folds {
        assert!((182..=184).contains(&f.len()), "{}", f.len());
        let members: Vec<Instance> = f.iter().map(|&i| data[i].clone()).collect();
        let h = class_histogram(&members, 3);
        for c in 0..3 {
            let expect = hist[c] as f64 * f.len() as f64 / data.len() as f64;
            assert!((h[c] as f64 - expect).abs() <= 1.0 + 1e-9, "class {c}: {} vs {expect}", h[c]);
        }
        f.iter().for_each(|&i| seen[i] += 1);
    }
    assert!(seen.iter().all(|&s| s == 1));

    let (train, test) = split_train_test(&data, 2, 5, 9, SplitReading::Cv).unwrap();
    assert_eq!(test.len(), folds[2].len());
    assert_eq!(train.len() + test.len(), data.len());
}

#[test]
fn partition_invariants() {
    let data = dataset(2);
    let (train, _) = split_train_test(&data, 0, 5, 4, SplitReading::Cv).unwrap();
    let hist = class_histogram(&train, 3);
    for (alpha, beta) in [(0.0, 0.0), (0.2, 0.2), (0.4, 0.2), (0.2, 0.4), (0.4, 0.4), (0.5, 0.5)] {
        let spec = PartitionSpec::symmetric(10, alpha, beta);
        let clients = partition_clients(&train, &spec, 17).unwrap();
        assert_eq!(clients.len(), 10);
        let sizes: Vec<usize> = clients.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), train.len());
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);

        // No instance duplicated or lost: every client row restricts exactly
        // one training row.
        let mut pool: Vec<Instance> = train.clone();
        for c in &clients {
            for inst in c {
                let pos = pool
                    .iter()
                    .position(|t| {
                        t.label == inst.label
                            && inst.pet.as_ref().is_none_or(|p| Some(p) == t.pet.as_ref())
                            && inst.mri.as_ref().is_none_or(|m| Some(m) == t.mri.as_ref())
                    })
                    .expect("client instance comes from train");
                pool.swap_remove(pos);
            }
        }
        assert!(pool.is_empty());

        let (n_pet, n_mri, _) = spec.client_type_counts();
        for (i, c) in clients.iter().enumerate() {
            let counts = ModalityCounts::of(c);
            let h = class_histogram(c, 3);
            for k in 0..3 {
                let expect = hist[k] as f64 / 10.0;
                assert!((h[k] as f64 - expect).abs() <= 1.0 + 1e-9);
            }
            if i < n_pet {
                assert_eq!((counts.pet, counts.mri), (c.len(), 0));
            } else if i < n_pet + n_mri {
                assert_eq!((counts.pet, counts.mri), (0, c.len()));
            } else {
                let (p, m, b) = spec.instance_type_counts(c.len());
                assert_eq!(type_counts(c), [p, m, b]);
            }
        }
        assert_eq!(clients, partition_clients(&train, &spec, 17).unwrap());
    }
}

#[test]
fn paper_settings_arithmetic() {
    assert_eq!(PartitionSpec::symmetric(10, 0.4, 0.4).client_type_counts(), (4, 4, 2));
    assert_eq!(PartitionSpec::symmetric(10, 0.2, 0.2).instance_type_counts(100), (20, 20, 60));
    let bad = PartitionSpec {
        clients: 3,
        alpha_pet: 0.7,
        alpha_mri: 0.7,
        beta_pet: 0.0,
        beta_mri: 0.0,
    };
    assert!(bad.validate().is_err());
}

#[test]
fn test_mix_is_a_third_each_and_label_independent() {
    let data = dataset(3);
    let mut chi_total = 0.0;
    let seeds = 20;
    let mut first_types: Option<Vec<usize>> = None;
    let mut varies = false;
    for seed in 0..seeds {
        let (_, test) = split_train_test(&data, 0, 5, 1, SplitReading::Cv).unwrap();
        let mixed = apply_test_modality_mix(&test, seed);
        let n = mixed.len();
        let c = type_counts(&mixed);
        assert_eq!(c, [n / 3, n / 3, n - 2 * (n / 3)]);
        for (a, b) in test.iter().zip(&mixed) {
            assert_eq!(a.label, b.label);
            if let Some(p) = &b.pet {
                assert_eq!(Some(p), a.pet.as_ref());
            }
            if let Some(m) = &b.mri {
                assert_eq!(Some(m), a.mri.as_ref());
            }
        }

        // Pearson chi-square of label against type.
        let mut table = [[0.0f64; 3]; 3];
        for inst in &mixed {
            let t = match inst.kind().unwrap() {
                InstanceKind::PetOnly => 0,
                InstanceKind::MriOnly => 1,
                InstanceKind::Multimodal => 2,
            };
            table[inst.label][t] += 1.0;
        }
        let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let cols: Vec<f64> = (0..3).map(|t| table.iter().map(|r| r[t]).sum()).collect();
        let mut chi = 0.0;
        for l in 0..3 {
            for t in 0..3 {
                let e = rows[l] * cols[t] / n as f64;
                chi += (table[l][t] - e).powi(2) / e;
            }
        }
        chi_total += chi;

        let types: Vec<usize> = mixed.iter().map(|i| i.kind().unwrap() as usize).collect();
        match &first_types {
            None => first_types = Some(types),
            Some(f) => varies |= *f != types,
        }
    }
    // 4 degrees of freedom; 9.49 is the 5% critical value.
    assert!(chi_total / seeds as f64 <= 9.49, "{}", chi_total / seeds as f64);
    assert!(varies, "assignment should depend on the seed");
}

#[test]
fn test_mix_rounding() {
    let base: Vec<Instance> = (0..10).map(|k| Instance::multimodal(vec![k as f64], vec![k as f64], k % 2)).collect();
    assert_eq!(type_counts(&apply_test_modality_mix(&base[..9], 0)), [3, 3, 3]);
    assert_eq!(type_counts(&apply_test_modality_mix(&base, 0)), [3, 3, 4]);
}

#[test]
fn wide_separation_is_linearly_separable() {
    let spec = SyntheticSpec {
        separation: 10.0,
        noise: 1.0,
        seed: 5,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    let features = |i: &Instance| -> Vec<f64> { i.pet.iter().chain(i.mri.iter()).flatten().copied().collect() };
    let dim = 2 * spec.feature_dim;

    // Nearest class mean is a linear rule: argmax_c (mu_c . x - |mu_c|^2 / 2).
    let mut means = vec![vec![0.0; dim]; 3];
    let hist = class_histogram(&data, 3);
    for i in &data {
        for (m, v) in means[i.label].iter_mut().zip(features(i)) {
            *m += v / hist[i.label] as f64;
        }
    }
    let correct = data
        .iter()
        .filter(|i| {
            let x = features(i);
            let score = |c: usize| {
                let mu = &means[c];
                mu.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - 0.5 * mu.iter().map(|a| a * a).sum::<f64>()
            };
            (0..3).max_by(|&a, &b| score(a).total_cmp(&score(b))).unwrap() == i.label
        })
        .count();
    let acc = correct as f64 / data.len() as f64;
    assert!(acc >= 0.99, "{acc}");
}

#[test]
fn synthetic_is_seed_deterministic() {
    let a = dataset(7);
    let b = dataset(7);
    let c = dataset(8);
    assert_eq!(a.iter().map(key).collect::<Vec<_>>(), b.iter().map(key).collect::<Vec<_>>());
    assert_ne!(a.iter().map(key).collect::<Vec<_>>(), c.iter().map(key).collect::<Vec<_>>());
    assert_eq!(class_histogram(&a, 3), vec![297, 451, 167]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partitions_conserve_instances(
        counts in prop::collection::vec(5usize..40, 2..4),
        clients in 1usize..8,
        alpha in 0.0f64..0.5,
        beta in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let data: Vec<Instance> = counts
            .iter()
            .enumerate()
            .flat_map(|(label, &c)| (0..c).map(move |k| Instance::multimodal(vec![k as f64], vec![label as f64], label)))
            .collect();
        let spec = PartitionSpec::symmetric(clients, alpha, beta);
        let parts = partition_clients(&data, &spec, seed).unwrap();
        prop_assert_eq!(parts.len(), clients);
        prop_assert_eq!(parts.iter().map(Vec::len).sum::<usize>(), data.len());
        let total: Vec<usize> = parts.iter().fold(vec![0; counts.len()], |mut acc, p| {
            for (a, h) in acc.iter_mut().zip(class_histogram(p, counts.len())) {
                *a += h;
            }
            acc
        });
        prop_assert_eq!(total, counts);
    }
}
