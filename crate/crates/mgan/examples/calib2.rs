// Last-10-snapshot mean KL/rel under matched smoothing, three seeds.
fn main() {
    let args: Vec<String> = std::env::args().collect();
    use mgan::cli::sample_joint;
    use mgan::metrics::*;
    use mgan::linalg::Matrix;
    use mgan::problems::{gen_synthetic, Problem};
    use mgan::trainer::*;
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2e-4);

    let ds = gen_synthetic(Problem::Synthetic4, 10_000, 101).unwrap();
    for seed in [11u64, 12, 13] {
        let config = TrainConfig {
            lambda: 0.01, epochs: 100, seed, learning_rate: lr, batch_size: 10,
            generator_hidden: vec![64, 128, 64], discriminator_hidden: vec![64, 128, 64],
            mono_pairs: 2_000, ..Default::default()
        };
        let out = train(&config, &ds).unwrap();
        let x_data = ds.x_block();
        let mut kls = Vec::new();
        let mut rels = Vec::new();
        for (i, (_, map)) in out.snapshots.iter().enumerate() {
            let samples = sample_joint(map, &x_data, 50_000, 900 + seed * 100 + i as u64).unwrap();
            let oracle_s =
                gen_synthetic(Problem::Synthetic4, 50_000, 1900 + seed * 100 + i as u64).unwrap();
            let pooled = {
                let mut rows: Vec<Vec<f64>> =
                    oracle_s.joint().iter_rows().map(|r| r.to_vec()).collect();
                rows.extend(samples.iter_rows().map(|r| r.to_vec()));
                Matrix::from_rows(&rows)
            };
            let grid = DensityGrid::from_samples(&pooled, 200, 0.1).unwrap();
            let scott = resolve_bandwidth(oracle_s.joint(), &KdeConfig::default()).unwrap();
            let h: Vec<f64> = scott.iter().map(|s| 2.0 * s).collect();
            let kt = kde_density_with_bandwidths(oracle_s.joint(), &h, &grid).unwrap();
            let km = kde_density_with_bandwidths(&samples, &h, &grid).unwrap();
            rels.push(relative_l2(&km, &kt).unwrap());
            kls.push(kl_grid(&kt, &km, DEFAULT_KL_FLOOR).unwrap());
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (lo, hi) = kls.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        println!("seed {seed}: last-10 mean kl {:.5} (range {:.5}..{:.5}) rel {:.4}",
            mean(&kls), lo, hi, mean(&rels));
    }
}
