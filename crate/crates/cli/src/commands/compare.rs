use fisheye_gs::splat::{run_comparison, summarize, write_comparison_csv, CompareCamera, CompareConfig, UtConfig};

use crate::error::Result;
use crate::output::Staging;
use crate::{CameraArg, CompareArgs};

pub fn run(args: &CompareArgs) -> Result<()> {
    let cfg = CompareConfig {
        fov_deg: args.fov,
        trials: args.trials,
        seed: args.seed,
        camera: match args.camera {
            CameraArg::Fisheye => CompareCamera::Fisheye,
            CameraArg::Affine => CompareCamera::Affine,
        },
        mc_samples: args.mc_samples,
        ut: UtConfig::new(args.kappa)?,
        ..CompareConfig::default()
    };
    let records = run_comparison(&cfg)?;
    let mut csv = Vec::new();
    write_comparison_csv(&mut csv, &records)?;
    let mut staging = Staging::new();
    staging.write(&args.out, &csv)?;
    staging.commit()?;
    for s in summarize(&records) {
        println!(
            "theta [{}, {}] deg: trials={} ut_better={} median_ewa_err={:.3e} median_ut_err={:.3e} max_ewa_err={:.3e} max_ut_err={:.3e} max_ewa_ut_diff={:.3e}",
            s.bin_lo_deg,
            s.bin_hi_deg,
            s.trials,
            s.ut_wins,
            s.median_ewa_err,
            s.median_ut_err,
            s.max_ewa_err,
            s.max_ut_err,
            s.max_ewa_ut_diff
        );
    }
    Ok(())
}
