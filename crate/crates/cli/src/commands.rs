//! One function per subcommand. Each returns `Ok(())` or a [`Failure`]
//! carrying the exit-code family; all printing happens here.

use std::fs;
use std::path::PathBuf;

use idac_core::data::{
    load_dataset, save_binary, save_csv, two_gaussians, two_moons, Dataset, Split,
};
use idac_core::experiment::{
    grid_search, positive_scores, render_table, run, save_grid, save_run,
};
use idac_core::losses::{eval_batch, LossKind, LossSpec};
use idac_core::metrics::MetricsReport;
use idac_core::model::load_checkpoint;
use idac_core::noise::inject_noise as core_inject_noise;
use idac_core::numerics::{
    derive_seed, finite_diff_grad, max_grad_rel_err, stream, Matrix, Rng,
};

use crate::overrides;
use crate::{
    DataKind, EvalArgs, Failure, FileFormat, GenDataArgs, GradcheckArgs, GridArgs,
    InjectNoiseArgs, TrainArgs,
};

fn save_dataset(dataset: &Dataset, path: &PathBuf, format: FileFormat) -> Result<(), Failure> {
    match format {
        FileFormat::Csv => save_csv(dataset, path),
        FileFormat::Binary => save_binary(dataset, path),
    }
    .map_err(Failure::data)
}

pub fn gen_data(args: &GenDataArgs, quiet: bool) -> Result<(), Failure> {
    // Parameter problems (zero-sized splits, empty mu, negative sigma) are
    // usage errors; the generators validate them.
    let (dataset, kind_name) = match args.kind {
        DataKind::TwoGaussians => (
            two_gaussians(args.n, &args.mu, args.sigma, args.seed).map_err(Failure::usage)?,
            "two_gaussians",
        ),
        DataKind::TwoMoons => (
            two_moons(args.n, args.noise_std, args.seed).map_err(Failure::usage)?,
            "two_moons",
        ),
    };

    let extension = match args.format {
        FileFormat::Csv => "csv",
        FileFormat::Binary => "bin",
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{kind_name}.{extension}")));
    save_dataset(&dataset, &out, args.format)?;

    let mut manifest = serde_json::json!({
        "kind": kind_name,
        "n": args.n,
        "seed": args.seed,
        "file": out,
        "dim": dataset.dim(),
        "num_classes": dataset.num_classes,
        "provenance": dataset.provenance,
    });
    let params = manifest.as_object_mut().unwrap();
    match args.kind {
        DataKind::TwoGaussians => {
            params.insert("mu".to_string(), serde_json::json!(args.mu));
            params.insert("sigma".to_string(), serde_json::json!(args.sigma));
        }
        DataKind::TwoMoons => {
            params.insert("noise_std".to_string(), serde_json::json!(args.noise_std));
        }
    }
    let manifest_path = out.with_extension("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).map_err(Failure::data)? + "\n",
    )
    .map_err(Failure::data)?;

    if !quiet {
        println!(
            "wrote {} ({} rows, {} features, splits {}/{}/{}) and {}",
            out.display(),
            dataset.len(),
            dataset.dim(),
            args.n[0],
            args.n[1],
            args.n[2],
            manifest_path.display()
        );
    }
    Ok(())
}

pub fn inject_noise(args: &InjectNoiseArgs, quiet: bool) -> Result<(), Failure> {
    let dataset = load_dataset(&args.data).map_err(Failure::data)?;
    let (noisy, record) =
        core_inject_noise(&dataset, args.rate, args.seed).map_err(Failure::auto)?;
    save_dataset(&noisy, &args.out, args.format)?;
    let record_path = args
        .record
        .clone()
        .unwrap_or_else(|| args.out.with_extension("noise_record.json"));
    fs::write(
        &record_path,
        serde_json::to_string_pretty(&record).map_err(Failure::data)? + "\n",
    )
    .map_err(Failure::data)?;

    if !quiet {
        println!(
            "flipped {} of {} train labels (rate {}); wrote {} and {}",
            record.flipped_indices.len(),
            dataset.split_len(Split::Train),
            args.rate,
            args.out.display(),
            record_path.display()
        );
    }
    Ok(())
}

pub fn train(args: &TrainArgs, quiet: bool) -> Result<(), Failure> {
    let config = overrides::load_config(&args.config, &args.set).map_err(Failure::Usage)?;
    let dataset = load_dataset(&args.data).map_err(Failure::data)?;
    let mut result = run(&config, &dataset).map_err(Failure::auto)?;
    let dir = save_run(&mut result, &args.out_root).map_err(Failure::data)?;

    if !quiet {
        println!("run {} -> {}", result.run_id, dir.display());
        println!(
            "selected epoch {} of {} (val AUROC {:.4})",
            result.selected_epoch,
            config.total_epochs,
            result.selected_val_auroc
        );
        println!(
            "test AUROC {} | final-epoch test AUROC {:.4}",
            result.test_metrics.formatted_auroc(),
            result.final_test_auroc
        );
    }
    Ok(())
}

pub fn grid(args: &GridArgs, quiet: bool) -> Result<(), Failure> {
    let base = overrides::load_config(&args.config, &args.set).map_err(Failure::Usage)?;
    let grid_text = fs::read_to_string(&args.grid)
        .map_err(|e| Failure::Usage(format!("grid {}: {e}", args.grid.display())))?;
    let grid: idac_core::experiment::GridSpec = serde_json::from_str(&grid_text)
        .map_err(|e| Failure::Usage(format!("grid {}: {e}", args.grid.display())))?;
    let dataset = load_dataset(&args.data).map_err(Failure::data)?;

    let sweep = || grid_search(&base, &grid, &dataset);
    let mut results = match args.parallel {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(Failure::usage)?
            .install(sweep),
        None => sweep(),
    }
    .map_err(Failure::auto)?;

    let root = save_grid(&mut results, &args.out_root).map_err(Failure::data)?;
    print!("{}", render_table(&results));
    if !quiet {
        println!("{} grid points saved under {}", results.len(), root.display());
    }
    Ok(())
}

pub fn eval(args: &EvalArgs, quiet: bool) -> Result<(), Failure> {
    let checkpoint = load_checkpoint(&args.checkpoint).map_err(Failure::data)?;
    let dataset = load_dataset(&args.data).map_err(Failure::data)?;
    if dataset.dim() != checkpoint.spec.input_dim {
        return Err(Failure::Data(format!(
            "dataset has {} features but the checkpoint expects {}",
            dataset.dim(),
            checkpoint.spec.input_dim
        )));
    }
    let split = args.split.to_split();
    let (features, labels, _) = dataset.split_rows(split);
    let scores = positive_scores(&checkpoint.state, &features, checkpoint.spec.num_classes)
        .map_err(Failure::auto)?;
    // Same substream as training used for its test metrics, so evaluating the
    // selected checkpoint on the test split reproduces summary.json exactly.
    let report = MetricsReport::compute(
        &scores,
        &labels,
        args.threshold,
        args.bootstrap,
        derive_seed(checkpoint.seed, &[stream::BOOTSTRAP]),
    )
    .map_err(Failure::auto)?;

    println!("{}", serde_json::to_string_pretty(&report).map_err(Failure::data)?);
    if !quiet {
        eprintln!(
            "{} split ({} rows): AUROC {}",
            split.name(),
            labels.len(),
            report.formatted_auroc()
        );
    }
    Ok(())
}

/// Draws one hyperparameter setting per instance; the second value is the
/// ramped abstention weight consumed only by the `dac` loss.
fn draw_spec(kind: LossKind, rng: &mut Rng) -> (LossSpec, f64) {
    match kind {
        LossKind::Ce => (LossSpec::ce(), 0.0),
        LossKind::Sce => (LossSpec::sce(-rng.uniform_in(0.5, 6.0)), 0.0),
        LossKind::Dac => {
            (LossSpec::dac(rng.uniform_in(0.0, 5.0)), rng.uniform_in(0.0, 5.0))
        }
        LossKind::Idac => (LossSpec::idac(rng.uniform_in(0.1, 5.0), rng.uniform()), 0.0),
        LossKind::Nce => (LossSpec::nce(), 0.0),
        LossKind::Ngce => (LossSpec::ngce(rng.uniform_in(0.2, 2.0)), 0.0),
        LossKind::Agce => {
            (LossSpec::agce(rng.uniform_in(0.3, 2.0), rng.uniform_in(0.2, 6.0)), 0.0)
        }
    }
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<(), Failure> {
    if args.instances == 0 {
        return Err(Failure::Usage("--instances must be >= 1".to_string()));
    }
    let kinds = [
        LossKind::Ce,
        LossKind::Sce,
        LossKind::Dac,
        LossKind::Idac,
        LossKind::Nce,
        LossKind::Ngce,
        LossKind::Agce,
    ];
    let mut rng = Rng::new(derive_seed(args.seed, &[stream::GRADCHECK]));
    let mut passed = 0usize;
    let mut overall_worst: f64 = 0.0;
    for kind in kinds {
        let mut worst: f64 = 0.0;
        for i in 0..args.instances {
            let n = if i % 2 == 0 { 1 } else { 8 };
            let k = if (i / 2) % 2 == 0 { 2 } else { 5 };
            let cols = k + usize::from(kind.has_abstain_head());
            let (spec, dac_alpha) = draw_spec(kind, &mut rng);
            let data: Vec<f64> = (0..n * cols).map(|_| rng.uniform_in(-4.0, 4.0)).collect();
            let logits = Matrix::from_vec(n, cols, data).map_err(Failure::auto)?;
            let targets: Vec<usize> =
                (0..n).map(|_| rng.below(k as u64) as usize).collect();

            let analytic =
                eval_batch(&spec, &logits, &targets, dac_alpha).map_err(Failure::auto)?;
            let numeric = finite_diff_grad(
                |flat: &[f64]| {
                    let m = Matrix::from_vec(n, cols, flat.to_vec())?;
                    Ok(eval_batch(&spec, &m, &targets, dac_alpha)?.loss)
                },
                logits.data(),
                1e-5,
            )
            .map_err(Failure::auto)?;
            worst = worst.max(max_grad_rel_err(analytic.grad_logits.data(), &numeric));
        }
        let ok = worst < args.tolerance;
        println!(
            "{:<4} max rel err {:.2e} over {} instances: {}",
            kind.name(),
            worst,
            args.instances,
            if ok { "ok" } else { "FAIL" }
        );
        passed += usize::from(ok);
        overall_worst = overall_worst.max(worst);
    }
    if passed == kinds.len() {
        println!("{}/{} losses pass (max rel err < {:e})", passed, kinds.len(), args.tolerance);
        Ok(())
    } else {
        Err(Failure::Numeric(format!(
            "{}/{} losses fail the gradient check (worst rel err {:.2e} >= {:e})",
            kinds.len() - passed,
            kinds.len(),
            overall_worst,
            args.tolerance
        )))
    }
}
