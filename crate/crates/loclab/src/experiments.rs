//! Experiment dispatch: every run kind consumes a validated config,
//! produces schema-stable CSV/JSON outputs, and finishes with a manifest.
//! Independent cells (per box side, per family batch) evaluate on a small
//! worker pool; results are placed by index, so aggregation order never
//! affects the output bytes.

use loclab_core::bernoulli::{decompose, uniform_parameter_bounds, verify_distribution};
use loclab_core::ensembles::{EnsembleSpec, FrozenAssignment};
use loclab_core::geometry::{Site, Square, TiltedRect};
use loclab_core::msa::{
    aligned_subsquare_corners, base_frozen_set, build_schedule, classify_square, freeze_update,
    hereditary_bad_count, initial_scale_probe, ScaleVerdicts,
};
use loclab_core::rng::KeyedStream;
use loclab_core::sperner::{
    chain_marginal, combbound_probe, kappa_sperner_max, layer_law, ProductLaw, SubsetFamily,
};
use loclab_core::spectral::{assemble, eigensolve, low_spectrum_histogram, wegner_mc};
use loclab_core::tilted::{ni_event_mc, uc_event_mc};
use serde_json::json;
use std::path::Path;

use crate::config::RunConfig;
use crate::export::{decomposition_json, square_json, write_csv, write_json};
use crate::manifest::ManifestBuilder;
use crate::registry::Registry;
use crate::CliError;

pub const EXPERIMENT_KINDS: &[&str] = &[
    "decompose",
    "sperner",
    "chain",
    "spectrum",
    "wegner",
    "uc",
    "ni",
    "msa",
    "lifshitz",
    "lemma-check",
];

/// Runs the experiment named in the config. Returns the output directory.
pub fn run(config_path: &Path) -> Result<std::path::PathBuf, CliError> {
    let (config, bytes) = RunConfig::load(config_path)?;
    let kind = config.run.experiment.clone();
    if !EXPERIMENT_KINDS.contains(&kind.as_str()) {
        return Err(CliError::Unknown(format!("experiment '{kind}'")));
    }
    let mut registry = Registry::default();
    registry.add_entries(&config.palette)?;

    let dir = config.output_dir();
    let mut manifest = ManifestBuilder::new(&config, &bytes, &dir)?;

    match kind.as_str() {
        "decompose" => run_decompose(&config, &registry, &mut manifest)?,
        "sperner" => run_sperner(&config, &mut manifest)?,
        "chain" => run_chain(&config, &mut manifest)?,
        "spectrum" => run_spectrum(&config, &registry, &mut manifest)?,
        "wegner" => run_wegner(&config, &registry, &mut manifest)?,
        "uc" => run_uc(&config, &registry, &mut manifest)?,
        "ni" => run_ni(&config, &registry, &mut manifest)?,
        "msa" => run_msa(&config, &registry, &mut manifest)?,
        "lifshitz" => run_lifshitz(&config, &registry, &mut manifest)?,
        "lemma-check" => crate::check::run_lemma_config(&config, &mut manifest)?,
        _ => unreachable!("kind validated above"),
    }
    manifest.finish()?;
    Ok(dir)
}

fn ensemble_of(config: &RunConfig, registry: &Registry) -> Result<EnsembleSpec, CliError> {
    let name = config.ensemble.name.as_deref().unwrap_or("bernoulli_half");
    registry.ensemble(name)
}

fn run_decompose(
    config: &RunConfig,
    registry: &Registry,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let name = config.ensemble.name.as_deref().unwrap_or("bernoulli_half");
    let dist = registry.distribution(name)?;
    let gamma = config.params.gamma.unwrap_or(0.25);
    let rho = config.params.rho.unwrap_or(0.5);
    let window = uniform_parameter_bounds(gamma, rho, dist.bound())
        .map_err(|e| CliError::Invalid(format!("{e}")))?;
    let dec = decompose(dist, gamma, rho).map_err(|e| CliError::Invalid(format!("{e}")))?;
    let deviation = verify_distribution(dist, &dec);
    let mut value = decomposition_json(&dec);
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("distribution".into(), json!(name));
        map.insert("gamma".into(), json!(gamma));
        map.insert("rho".into(), json!(rho));
        map.insert("window".into(), json!([window.p_minus, window.p_plus, window.iota]));
        map.insert("cdf_deviation".into(), json!(deviation));
    }
    write_json(manifest, "decomposition.json", value)
}

fn layer_size(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Draws a family with a strictly positive Sperner margin: sparse random
/// families and one- or two-layer slices, retried until the margin is
/// positive (single layers always are, so this terminates). Acceptance
/// probabilities are scaled so families stay within ~800 members and the
/// quadratic margin computation stays cheap.
pub fn random_sperner_family(stream: &mut KeyedStream, n: usize) -> (SubsetFamily, f64) {
    loop {
        let members: Vec<u32> = match stream.next_index(3) {
            0 => {
                let q = (4.0 * n as f64 / (1u64 << n) as f64).min(0.5);
                (0u32..1 << n).filter(|_| stream.next_unit() < q).collect()
            }
            1 => {
                let k = 1 + stream.next_index(n - 1);
                let q = (800.0 / layer_size(n, k)).min(0.5);
                (0u32..1 << n)
                    .filter(|m| m.count_ones() as usize == k && stream.next_unit() < q)
                    .collect()
            }
            _ => {
                let k = 1 + stream.next_index(n.saturating_sub(2).max(1));
                let q = (400.0 / layer_size(n, k)).min(0.3);
                (0u32..1 << n)
                    .filter(|m| {
                        let c = m.count_ones() as usize;
                        (c == k || c == k + 1) && stream.next_unit() < q
                    })
                    .collect()
            }
        };
        if members.is_empty() {
            continue;
        }
        let family = SubsetFamily::new(n, members).expect("masks in range");
        let ks = kappa_sperner_max(&family).expect("nonempty family");
        if ks.kappa_star > 0.0 {
            return (family, ks.kappa_star);
        }
    }
}

fn run_sperner(config: &RunConfig, manifest: &mut ManifestBuilder) -> Result<(), CliError> {
    let n = config.params.ground_set.unwrap_or(16).min(20);
    let beta_floor = config.params.beta_floor.unwrap_or(0.2);
    let families = config.params.families.unwrap_or(config.run.trials);
    let mut stream = KeyedStream::new(config.run.seed, 0);
    let mut rows = Vec::new();
    let mut family_dump = Vec::new();
    for _ in 0..families {
        let law = ProductLaw::new(
            (0..n).map(|_| stream.next_range(beta_floor, 1.0 - beta_floor)).collect(),
        )
        .map_err(|e| CliError::Invalid(format!("{e}")))?;
        let (family, kappa_star) = random_sperner_family(&mut stream, n);
        let (prob, ratio) =
            combbound_probe(&family, &law).map_err(|e| CliError::Invalid(format!("{e}")))?;
        if family_dump.len() < 16 {
            family_dump.push(crate::export::family_json(&family));
        }
        rows.push(vec![
            n.to_string(),
            format!("{}", law.beta()),
            format!("{kappa_star}"),
            format!("{prob}"),
            format!("{ratio}"),
        ]);
    }
    write_csv(manifest, "sperner.csv", "n,beta,kappa_star,prob,ratio", rows)?;
    write_json(manifest, "families.json", json!({ "families": family_dump }))
}

fn run_chain(config: &RunConfig, manifest: &mut ManifestBuilder) -> Result<(), CliError> {
    let n = config.params.ground_set.unwrap_or(6).min(12);
    let beta_floor = config.params.beta_floor.unwrap_or(0.2);
    let laws = config.run.trials.min(64);
    let mut stream = KeyedStream::new(config.run.seed, 1);
    let mut rows = Vec::new();
    for law_index in 0..laws {
        let law = ProductLaw::new(
            (0..n).map(|_| stream.next_range(beta_floor, 1.0 - beta_floor)).collect(),
        )
        .map_err(|e| CliError::Invalid(format!("{e}")))?;
        let layers = layer_law(&law);
        for k in 0..=n {
            let marginal =
                chain_marginal(&law, k).map_err(|e| CliError::Invalid(format!("{e}")))?;
            let mut tv = 0.0;
            for (mask, pr) in marginal {
                tv += (pr - law.point_prob(mask) / layers[k]).abs();
            }
            rows.push(vec![
                law_index.to_string(),
                n.to_string(),
                k.to_string(),
                format!("{}", tv / 2.0),
            ]);
        }
    }
    write_csv(manifest, "chain.csv", "law,n,k,tv_distance", rows)
}

fn run_spectrum(
    config: &RunConfig,
    registry: &Registry,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let side = config.require_side()?;
    let spec = ensemble_of(config, registry)?;
    let bx = Square::new(Site::new(0, 0), side).map_err(|e| CliError::Invalid(format!("{e}")))?;
    let mut rows = Vec::new();
    for replica in 0..config.run.trials {
        let field = loclab_core::ensembles::sample_potential(
            &spec,
            &bx,
            &FrozenAssignment::new(),
            config.run.seed,
            replica,
        )
        .map_err(|e| CliError::Invalid(format!("{e}")))?;
        if replica == 0 {
            write_csv(manifest, "field.csv", "x,y,value", crate::export::field_rows(&field))?;
        }
        let h = assemble(&bx, &field).map_err(|e| CliError::Invalid(format!("{e}")))?;
        let data = eigensolve(&h).map_err(|e| CliError::Invalid(format!("{e}")))?;
        for (i, &e) in data.eigenvalues.iter().enumerate().take(8) {
            rows.push(vec![replica.to_string(), i.to_string(), format!("{e}")]);
        }
        rows.push(vec![
            replica.to_string(),
            "max".into(),
            format!("{}", data.eigenvalues.last().unwrap()),
        ]);
    }
    write_csv(manifest, "spectrum.csv", "replica,index,eigenvalue", rows)
}

/// Evaluates cells on a scoped worker pool, writing results by index.
fn parallel_cells<T: Send, F: Fn(usize) -> T + Sync>(count: usize, f: F) -> Vec<T> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(count.max(1));
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slot_refs: Vec<std::sync::Mutex<&mut Option<T>>> =
        slots.iter_mut().map(std::sync::Mutex::new).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let value = f(i);
                **slot_refs[i].lock().unwrap() = Some(value);
            });
        }
    });
    slots.into_iter().map(|s| s.expect("all cells computed")).collect()
}

fn run_wegner(
    config: &RunConfig,
    registry: &Registry,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let sides = config
        .geometry
        .sides
        .clone()
        .or_else(|| config.geometry.side.map(|s| vec![s]))
        .ok_or_else(|| CliError::Invalid("geometry.sides is required".into()))?;
    let spec = ensemble_of(config, registry)?;
    let ebar = config.params.ebar.unwrap_or(0.05);
    let trials = config.run.trials;
    let seed = config.run.seed;
    let results = parallel_cells(sides.len(), |i| {
        let side = sides[i];
        let bx = Square::new(Site::new(0, 0), side).expect("positive side");
        let l1 = match (config.params.l1, config.params.l1_power) {
            (Some(l1), _) => l1,
            (None, Some(p)) => (side as f64).powf(p),
            (None, None) => (side as f64).powf(0.9),
        };
        wegner_mc(&spec, &bx, ebar, l1, &FrozenAssignment::new(), trials, seed)
            .map(|est| (side, l1, est))
    });
    let mut rows = Vec::new();
    for r in results {
        let (side, _l1, est) = r.map_err(|e| CliError::Invalid(format!("{e}")))?;
        rows.push(vec![
            side.to_string(),
            format!("{ebar}"),
            est.trials.to_string(),
            format!("{}", est.p_hat),
            format!("{}", est.ci_lo),
            format!("{}", est.ci_hi),
        ]);
    }
    write_csv(manifest, "wegner.csv", "L,ebar,trials,p_hat,ci_lo,ci_hi", rows)
}

fn run_uc(
    config: &RunConfig,
    registry: &Registry,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let side = config.require_side()?;
    let spec = ensemble_of(config, registry)?;
    let ebar = config.params.ebar.unwrap_or(0.05);
    let alpha = config.params.alpha.unwrap_or(1.0);
    let eps = config.params.eps.unwrap_or(0.5);
    let bx = Square::new(Site::new(0, 0), side).map_err(|e| CliError::Invalid(format!("{e}")))?;
    let freq = uc_event_mc(
        &spec,
        &bx,
        ebar,
        alpha,
        eps,
        &FrozenAssignment::new(),
        config.run.trials,
        config.run.seed,
    )
    .map_err(|e| CliError::Invalid(format!("{e}")))?;
    let rows = vec![vec![
        side.to_string(),
        format!("{alpha}"),
        format!("{eps}"),
        config.run.trials.to_string(),
        format!("{freq}"),
    ]];
    write_csv(manifest, "uc.csv", "L,alpha,eps,trials,frequency", rows)
}

fn run_ni(
    config: &RunConfig,
    registry: &Registry,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let (a, b) = config.require_rect()?;
    let spec = ensemble_of(config, registry)?;
    let ebar = config.params.ebar.unwrap_or(0.05);
    let alpha = config.params.alpha.unwrap_or(0.7);
    let eps = config.params.eps.unwrap_or(0.01);
    let boundary_samples = config.params.boundary_samples.unwrap_or(3);
    let relaxed = config.params.relaxed.unwrap_or(true);
    let rect = TiltedRect::canonical(a, b).map_err(|e| CliError::Invalid(format!("{e}")))?;
    let freq = ni_event_mc(
        &spec,
        &rect,
        ebar,
        alpha,
        eps,
        &FrozenAssignment::new(),
        config.run.trials,
        boundary_samples,
        config.run.seed,
        relaxed,
    )
    .map_err(|e| CliError::Invalid(format!("{e}")))?;
    let rows = vec![vec![
        a.to_string(),
        b.to_string(),
        format!("{alpha}"),
        format!("{eps}"),
        config.run.trials.to_string(),
        format!("{freq}"),
    ]];
    write_csv(manifest, "ni.csv", "a,b,alpha,eps,trials,frequency", rows)?;

    // One sample extension for the tilted-field schema.
    let v = loclab_core::ensembles::sample_on_sites(
        &spec,
        rect.sites(),
        &FrozenAssignment::new(),
        config.run.seed,
        0,
    )
    .map_err(|e| CliError::Invalid(format!("{e}")))?;
    let mut stream = KeyedStream::new(config.run.seed ^ 0xf1e1d, 0);
    let data = loclab_core::tilted::WestBoundaryData::random_off_first_diagonals(&rect, &mut stream);
    if data.sup_norm() > 0.0 {
        let field = loclab_core::tilted::extend_from_west(&rect, &data, ebar, &v)
            .map_err(|e| CliError::Invalid(format!("{e}")))?;
        write_csv(manifest, "tilted_field.csv", "s,t,value", crate::export::tilted_field_rows(&field))?;
    }
    Ok(())
}

fn run_msa(
    config: &RunConfig,
    registry: &Registry,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let spec = ensemble_of(config, registry)?;
    let eps = config.params.eps.unwrap_or(0.12);
    let nu = config.params.nu.unwrap_or(0.08);
    let delta = config.params.delta.unwrap_or(0.05);
    let l0 = config.params.l0.unwrap_or(8);
    let depth = config.params.depth.unwrap_or(2).min(3);
    let ebar_max = config.params.ebar_max.unwrap_or(0.05);
    let domain_side = config.geometry.side.unwrap_or(32);

    let schedule = build_schedule(eps, nu, delta, l0, depth)
        .map_err(|e| CliError::Invalid(format!("{e}")))?;
    let domain =
        Square::new(Site::new(0, 0), domain_side).map_err(|e| CliError::Invalid(format!("{e}")))?;
    let mut state =
        base_frozen_set(eps, &domain).map_err(|e| CliError::Invalid(format!("{e}")))?;

    let mut tallies = Vec::new();
    let mut verdict_rows = Vec::new();
    let mut frozen_sizes = vec![state.sites.len()];
    for k in 0..=depth.min(1) {
        let side = match schedule.scale(k) {
            Some(s) if s <= domain_side && s <= 64 => s,
            _ => break,
        };
        let corners = aligned_subsquare_corners(&domain, side);
        let frozen_values = FrozenAssignment::from_values(
            state.sites.iter().filter(|p| domain.contains(*p)).map(|p| (p, 0.0)),
        );
        let classified = parallel_cells(corners.len(), |i| {
            let sq = Square::new_aligned(Site::new(corners[i].0, corners[i].1), side)
                .expect("aligned corner enumeration");
            classify_square(
                &sq,
                &schedule,
                &frozen_values,
                &spec,
                ebar_max,
                config.run.trials,
                config.run.seed,
            )
            .map(|c| (sq, c.good))
        });
        let mut verdicts = ScaleVerdicts::new(side);
        let mut good_count = 0usize;
        for c in classified {
            let (sq, good) = c.map_err(|e| CliError::Invalid(format!("{e}")))?;
            verdicts.record(&sq, good);
            if good {
                good_count += 1;
            }
            verdict_rows.push(vec![
                k.to_string(),
                side.to_string(),
                sq.corner.x.to_string(),
                sq.corner.y.to_string(),
                if good { "good".into() } else { "bad".into() },
            ]);
        }
        let bad = verdicts.bad_count();
        // Hereditary chains of depth one: the bad squares themselves.
        let hereditary =
            hereditary_bad_count(&domain, &[verdicts.clone()]).unwrap_or(bad as u64);
        tallies.push(json!({
            "scale_index": k,
            "side": side,
            "squares": good_count + bad,
            "good": good_count,
            "bad": bad,
            "hereditary_bad": hereditary,
        }));
        // Freeze covers around bad squares at the next scale.
        let bad_squares: Vec<Square> = corners
            .iter()
            .filter(|c| verdicts.is_bad(**c) == Some(true))
            .map(|c| Square::new(Site::new(c.0, c.1), side).unwrap())
            .collect();
        let covers: Vec<Square> = if bad_squares.is_empty() {
            Vec::new()
        } else {
            loclab_core::geometry::cover_defects(&domain, &bad_squares, side * 2, 2)
                .map(|(_, covers)| covers)
                .unwrap_or_else(|_| bad_squares.clone())
        };
        state = freeze_update(&state, &covers, &schedule, 1.0)
            .map_err(|e| CliError::Invalid(format!("{e}")))?;
        frozen_sizes.push(state.sites.len());
    }

    // Initial-scale net probe on the base grid.
    let kappa = config.params.kappa.unwrap_or(0.5);
    let radius = config.params.net_radius.unwrap_or(8.0);
    let base = base_frozen_set(eps, &domain).map_err(|e| CliError::Invalid(format!("{e}")))?;
    let probe = initial_scale_probe(
        &spec,
        kappa,
        radius,
        &Square::new(Site::new(0, 0), domain_side.min(16)).unwrap(),
        &base.sites,
        config.run.trials.min(50),
        config.run.seed ^ 0xa11,
    )
    .map_err(|e| CliError::Invalid(format!("{e}")))?;

    write_csv(manifest, "msa_verdicts.csv", "scale_index,side,corner_x,corner_y,verdict",
        verdict_rows)?;
    write_json(
        manifest,
        "msa_manifest.json",
        json!({
            "schedule": {
                "eps": eps, "nu": nu, "delta": delta,
                "exponents": schedule.exponents,
                "decay": schedule.decay,
                "m_tilde": schedule.m_tilde,
            },
            "domain": square_json(&domain),
            "tallies": tallies,
            "frozen_sizes": frozen_sizes,
            "net_probe": {
                "frequency": probe.net_frequency,
                "c_fit": probe.c_fit,
                "decay_fit": probe.decay_fit,
            },
        }),
    )
}

fn run_lifshitz(
    config: &RunConfig,
    registry: &Registry,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let sides = config
        .geometry
        .sides
        .clone()
        .or_else(|| config.geometry.side.map(|s| vec![s]))
        .ok_or_else(|| CliError::Invalid("geometry.sides is required".into()))?;
    let spec = ensemble_of(config, registry)?;
    let histograms = low_spectrum_histogram(&spec, &sides, config.run.trials, config.run.seed)
        .map_err(|e| CliError::Invalid(format!("{e}")))?;
    let mut rows = Vec::new();
    for (side, samples) in histograms {
        for q in 0..=20 {
            let p = q as f64 / 20.0;
            let idx = ((samples.len() - 1) as f64 * p).round() as usize;
            rows.push(vec![side.to_string(), format!("{p}"), format!("{}", samples[idx])]);
        }
    }
    write_csv(manifest, "lifshitz.csv", "L,quantile,lambda_min", rows)
}
