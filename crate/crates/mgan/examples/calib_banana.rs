// One banana-ablation cell per argument set: map kind, order, epochs.
fn main() {
    use mgan::metrics::*;
    use mgan::losses::LossConfig;
    use mgan::oracles::banana_joint_density;
    use mgan::problems::gen_banana;
    use mgan::trainer::*;
    use mgan::transport::conditional_sample;

    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(300);
    let seed: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1);

    let favorable = gen_banana(10_000, 500 + seed, false).unwrap();
    let reversed = gen_banana(10_000, 500 + seed, true).unwrap();

    let train_cell = |ds: &mgan::problems::JointDataset, map: MapShape, order: Option<Vec<usize>>| {
        let config = TrainConfig {
            loss: LossConfig::lsgan(),
            lambda: 0.01,
            epochs,
            learning_rate: 0.5e-4,
            seed,
            generator_hidden: if map == MapShape::Block { vec![32, 64, 32] } else { vec![22, 46, 22] },
            discriminator_hidden: vec![64, 128, 64],
            map,
            triangular_order: order,
            normalize: true,
            snapshot_last: 1,
            mono_pairs: 2_000,
            ..Default::default()
        };
        train(&config, ds).unwrap()
    };
    let kl_of = |map: &mgan::transport::TransportMap, swap: bool, s: u64| {
        let mut rng = mgan::rngs::derive_rng(s, 0xbaa);
        let samples = conditional_sample(map, &[], 50_000, &mut rng).unwrap();
        let config = KdeConfig { bandwidth: Bandwidth::CvFiveFold, cv_subsample: 10_000, seed: 3 };
        let grid = DensityGrid::from_samples(&samples, 200, 0.1).unwrap();
        let kde = kde_density(&samples, &config, &grid).unwrap();
        let mut truth = grid.clone();
        if swap {
            truth.fill_with(|p| banana_joint_density(p[1], p[0]));
        } else {
            truth.fill_with(|p| banana_joint_density(p[0], p[1]));
        }
        kl_grid(&truth, &kde, DEFAULT_KL_FLOOR).unwrap()
    };

    let t0 = std::time::Instant::now();
    let block_fav = train_cell(&favorable, MapShape::Block, None);
    let block_rev = train_cell(&reversed, MapShape::Block, None);
    let tri_fav = train_cell(&favorable, MapShape::Triangular, Some(vec![0, 1]));
    let tri_rev = train_cell(&favorable, MapShape::Triangular, Some(vec![1, 0]));
    println!("trained 4 cells in {:.0} s", t0.elapsed().as_secs_f64());
    let kbf = kl_of(&block_fav.map, false, 40 + seed);
    let kbr = kl_of(&block_rev.map, true, 50 + seed);
    let ktf = kl_of(&tri_fav.map, false, 60 + seed);
    let ktr = kl_of(&tri_rev.map, false, 70 + seed);
    println!(
        "seed {seed} epochs {epochs}: block {kbf:.4}/{kbr:.4} (x{:.2})  tri {ktf:.4}->{ktr:.4} (x{:.2})",
        kbf.max(kbr) / kbf.min(kbr),
        ktr / ktf
    );
    println!("mono: bf {:.3} br {:.3} tf {:.3} tr {:.3}",
        block_fav.history.records.last().unwrap().monotonicity_probability,
        block_rev.history.records.last().unwrap().monotonicity_probability,
        tri_fav.history.records.last().unwrap().monotonicity_probability,
        tri_rev.history.records.last().unwrap().monotonicity_probability);
}
