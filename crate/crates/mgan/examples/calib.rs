fn main() {
    use mgan::cli::sample_joint;
    use mgan::metrics::*;
    use mgan::problems::{gen_synthetic, Problem};
    use mgan::trainer::*;
    use mgan::transport::conditional_sample;
    use mgan::linalg::Matrix;

    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let hidden: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(64);
    let batch: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(100);

    let ds = gen_synthetic(Problem::Synthetic4, 10_000, 101).unwrap();
    let config = TrainConfig {
        lambda: 0.01,
        epochs: 100,
        seed: 11,
        learning_rate: lr,
        batch_size: batch,
        generator_hidden: vec![hidden, 2 * hidden, hidden],
        discriminator_hidden: vec![hidden, 2 * hidden, hidden],
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let out = train(&config, &ds).unwrap();
    println!("trained in {:.0} s", t0.elapsed().as_secs_f64());
    for r in out.history.records.iter().step_by(20) {
        println!("epoch {:3}: gen {:.4} disc {:.4} pen {:.3} mono {:.3}",
            r.epoch, r.generator_loss, r.discriminator_loss, r.penalty, r.monotonicity_probability);
    }
    let r = out.history.records.last().unwrap();
    println!("epoch {:3}: gen {:.4} disc {:.4} pen {:.3} mono {:.3}",
        r.epoch, r.generator_loss, r.discriminator_loss, r.penalty, r.monotonicity_probability);

    // Conditional at x = 0: truth mean 0.3, var 0.09, skew 2, support >= 0.
    let mut rng = mgan::rngs::rng_from_seed(5);
    let ys = conditional_sample(&out.map, &[0.0], 20_000, &mut rng).unwrap();
    let m = &sample_moments(&ys).unwrap()[0];
    let min = ys.data().iter().cloned().fold(f64::INFINITY, f64::min);
    println!("y|0: mean {:.4} var {:.4} skew {:.3} min {:.3}", m.mean, m.variance, m.skewness, min);

    // Smoothed-truth joint metrics, last snapshot only.
    let x_data = ds.x_block();
    let samples = sample_joint(&out.map, &x_data, 50_000, 900).unwrap();
    let oracle = gen_synthetic(Problem::Synthetic4, 50_000, 1900).unwrap();
    let pooled = {
        let mut rows: Vec<Vec<f64>> = oracle.joint().iter_rows().map(|r| r.to_vec()).collect();
        rows.extend(samples.iter_rows().map(|r| r.to_vec()));
        Matrix::from_rows(&rows)
    };
    let grid = DensityGrid::from_samples(&pooled, 200, 0.1).unwrap();
    let kc = KdeConfig::default();
    let kt = kde_density(oracle.joint(), &kc, &grid).unwrap();
    let km = kde_density(&samples, &kc, &grid).unwrap();
    println!("joint rel-l2 {:.4} kl {:.5}",
        relative_l2(&km, &kt).unwrap(), kl_grid(&kt, &km, DEFAULT_KL_FLOOR).unwrap());
}
