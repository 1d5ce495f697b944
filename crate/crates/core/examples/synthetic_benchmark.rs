use batchcal::data::{generate_synthetic_pair, StandardizationParams, SyntheticSpec};
use batchcal::metrics::{median_heuristic, mmd_protocol, ProtocolConfig};
use batchcal::trainer::{calibrate, train, TrainConfig};
use batchcal::Rng;

fn main() -> batchcal::Result<()> {
    let pair = generate_synthetic_pair(&SyntheticSpec::default_with_seed(1))?;
    let params = StandardizationParams::fit(&pair.target)?;
    let s = params.apply(&pair.source.data)?;
    let t = params.apply(&pair.target.data)?;

    let (state, _log) = train(
        &s,
        &t,
        &TrainConfig {
            seed: 1,
            ..TrainConfig::default()
        },
    )?;
    let calibrated = calibrate(&state.generator, &s)?;

    let kernel = median_heuristic(&s, &t, &mut Rng::new(1))?;
    let cfg = ProtocolConfig::default();
    let pre = mmd_protocol(&s, &t, &kernel, &cfg, &mut Rng::new(2))?;
    let post = mmd_protocol(&calibrated, &t, &kernel, &cfg, &mut Rng::new(2))?;
    println!(
        "median MMD² {:.4} -> {:.4}",
        pre.summary.median, post.summary.median
    );
    Ok(())
}
