//! Randomized premise-satisfying suites for the deterministic checkers.
//! Each suite draws instances designed to satisfy a checker's premises,
//! runs the checker, and tallies conclusive passes, abstentions, and
//! conclusion violations (of which there must be none).

use loclab_core::ensembles::{sample_potential, EnsembleSpec, FrozenAssignment, SiteDistribution};
use loclab_core::geometry::{Site, Square};
use loclab_core::linalg::DenseMat;
use loclab_core::msa::{aligned_subsquare_corners, deterministic_propagation, DetScales};
use loclab_core::rng::KeyedStream;
use loclab_core::spectral::{
    almost_orthogonal_count, assemble, eigenvalue_push_check, energy_window_check,
    geometric_resolvent_check, resolvent, CheckOutcome,
};

use crate::config::RunConfig;
use crate::export::write_csv;
use crate::manifest::ManifestBuilder;
use crate::CliError;

pub const LEMMA_NAMES: &[&str] = &["eigenvar", "taobound", "contresbound", "detmsa", "geomres"];

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub lemma: String,
    pub instances: u64,
    pub conclusive: u64,
    pub abstained: u64,
    pub violations: u64,
}

impl SuiteReport {
    pub fn line(&self) -> String {
        format!(
            "lemma {}: instances={} conclusive={} abstained={} violations={}",
            self.lemma, self.instances, self.conclusive, self.abstained, self.violations
        )
    }
}

pub fn run_suite(lemma: &str, instances: u64, seed: u64) -> Result<SuiteReport, CliError> {
    match lemma {
        "eigenvar" => Ok(eigenvar_suite(instances, seed)),
        "taobound" => Ok(taobound_suite(instances, seed)),
        "contresbound" => contresbound_suite(instances, seed),
        "detmsa" => detmsa_suite(instances, seed),
        "geomres" => geomres_suite(instances, seed),
        other => Err(CliError::Unknown(format!("lemma '{other}'"))),
    }
}

/// Runs the `lemma-check` experiment kind from a config.
pub fn run_lemma_config(
    config: &RunConfig,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let lemma = config
        .params
        .lemma
        .as_deref()
        .ok_or_else(|| CliError::Invalid("params.lemma is required".into()))?;
    let instances = config.params.instances.unwrap_or(config.run.trials);
    let report = run_suite(lemma, instances, config.run.seed)?;
    if report.violations > 0 {
        return Err(CliError::Invalid(format!("{} conclusion violations", report.violations)));
    }
    write_csv(
        manifest,
        "lemma_check.csv",
        "lemma,instances,conclusive,abstained,violations",
        vec![vec![
            report.lemma.clone(),
            report.instances.to_string(),
            report.conclusive.to_string(),
            report.abstained.to_string(),
            report.violations.to_string(),
        ]],
    )
}

fn tally(report: &mut SuiteReport, outcome: CheckOutcome) {
    match outcome {
        CheckOutcome::Holds { .. } => report.conclusive += 1,
        CheckOutcome::Inapplicable => report.abstained += 1,
        CheckOutcome::Violated { .. } => report.violations += 1,
    }
}

/// Rank-one push instances: one eigenvalue trapped below the threshold
/// radius with its eigenvector concentrated at the bumped coordinate, the
/// rest of the spectrum above the guard band.
pub fn eigenvar_instance(
    stream: &mut KeyedStream,
    n: usize,
) -> Option<(DenseMat, usize, [f64; 5])> {
    let k = stream.next_index(n);
    let r3 = stream.next_range(0.4, 0.8);
    let r4 = stream.next_range(r3 + 0.01, 0.9);
    let r5 = stream.next_range(r4 + 0.01, 0.99);
    let c = 1.0 / 16.0;
    // r1 below c·r3·r5, then r2 built from the second smallness constraint
    // r1 ≤ c·r2·r3/r4, keeping r2 well under r3.
    let r1 = stream.next_range(1e-5, 0.05) * c * r3 * r5;
    let r2_min = r1 * r4 / (c * r3);
    let r2 = stream.next_range(r2_min * 1.01, (r2_min * 3.0).min(r3 * 0.9));
    if !(r1 < r2 && r2 < r3) || r1 > c * (r3 * r5).min(r2 * r3 / r4) {
        return None;
    }
    let trapped = stream.next_range(r1 * 0.1, r1 * 0.9);
    let mut evals = vec![trapped];
    for _ in 1..n {
        evals.push(stream.next_range(r5 + 0.05, 3.0));
    }
    let mut v0: Vec<f64> = (0..n).map(|_| stream.next_signed() * 0.2).collect();
    v0[k] = 1.0;
    let norm: f64 = v0.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v0.iter_mut() {
        *x /= norm;
    }
    if v0[k] * v0[k] < r3 {
        return None;
    }
    let mut basis = vec![v0];
    while basis.len() < n {
        let mut w: Vec<f64> = (0..n).map(|_| stream.next_signed()).collect();
        for b in &basis {
            let dot: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= dot * bi;
            }
        }
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        basis.push(w);
    }
    let mut a = DenseMat::zeros(n, n);
    for (lam, b) in evals.iter().zip(&basis) {
        for r in 0..n {
            for cidx in 0..n {
                a[(r, cidx)] += lam * b[r] * b[cidx];
            }
        }
    }
    Some((a, k, [r1, r2, r3, r4, r5]))
}

fn eigenvar_suite(instances: u64, seed: u64) -> SuiteReport {
    let mut report = SuiteReport {
        lemma: "eigenvar".into(),
        instances,
        conclusive: 0,
        abstained: 0,
        violations: 0,
    };
    let mut stream = KeyedStream::new(seed, 0x01);
    let mut produced = 0;
    while produced < instances {
        let n = 4 + stream.next_index(13); // up to 16x16
        if let Some((a, k, radii)) = eigenvar_instance(&mut stream, n) {
            let outcome = eigenvalue_push_check(&a, k, radii, n - 1, n - 1, 1.0 / 16.0)
                .expect("valid indices");
            tally(&mut report, outcome);
            produced += 1;
        }
    }
    report
}

fn taobound_suite(instances: u64, seed: u64) -> SuiteReport {
    let mut report = SuiteReport {
        lemma: "taobound".into(),
        instances,
        conclusive: 0,
        abstained: 0,
        violations: 0,
    };
    let mut stream = KeyedStream::new(seed, 0x02);
    for i in 0..instances {
        let n = 4 + stream.next_index(13);
        let vectors: Vec<Vec<f64>> = if i % 2 == 0 {
            // Jittered orthonormal subset: the Gram hypothesis holds.
            let m = 1 + stream.next_index(n);
            let jitter = 0.2 / (5.0 * n as f64).sqrt();
            (0..m)
                .map(|row| {
                    let mut v: Vec<f64> =
                        (0..n).map(|_| stream.next_signed() * jitter / n as f64).collect();
                    v[row] += 1.0;
                    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter().map(|x| x / norm).collect()
                })
                .collect()
        } else {
            // Random unit vectors, usually exceeding the deviation gate.
            let m = n + 2;
            (0..m)
                .map(|_| {
                    let mut v: Vec<f64> = (0..n).map(|_| stream.next_signed()).collect();
                    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|x| *x /= norm);
                    v
                })
                .collect()
        };
        tally(&mut report, almost_orthogonal_count(&vectors));
    }
    report
}

fn contresbound_suite(instances: u64, seed: u64) -> Result<SuiteReport, CliError> {
    let mut report = SuiteReport {
        lemma: "contresbound".into(),
        instances,
        conclusive: 0,
        abstained: 0,
        violations: 0,
    };
    let mut stream = KeyedStream::new(seed, 0x03);
    for replica in 0..instances {
        let side = 6 + stream.next_index(7) as i64; // up to 12
        let shift = stream.next_range(3.0, 6.0);
        let spec = EnsembleSpec::Iid(SiteDistribution::uniform(0.0, 2.0, 2.0));
        let bx = Square::new(Site::new(0, 0), side).expect("positive side");
        let field = sample_potential(&spec, &bx, &FrozenAssignment::new(), seed ^ 0x77, replica)
            .map_err(|e| CliError::Invalid(format!("{e}")))?
            .shifted(shift);
        let h = assemble(&bx, &field).map_err(|e| CliError::Invalid(format!("{e}")))?;
        let ebar = stream.next_range(0.0, 0.5);
        // Instantiate the hypothesis from the measured resolvent: pick a
        // decay rate, then the smallest amplitude that makes it true.
        let beta = stream.next_range(0.2, 0.8);
        let r = resolvent(&h, ebar).map_err(|e| CliError::Invalid(format!("{e}")))?;
        let sites: Vec<Site> = bx.sites().collect();
        let mut alpha = f64::NEG_INFINITY;
        for (i, &x) in sites.iter().enumerate() {
            for (j, &y) in sites.iter().enumerate() {
                let need = r[(i, j)].abs().max(1e-300).ln() + beta * x.linf_dist(y) as f64;
                alpha = alpha.max(need);
            }
        }
        let outcome = energy_window_check(&h, ebar, alpha + 1e-9, beta, 5)
            .map_err(|e| CliError::Invalid(format!("{e}")))?;
        tally(&mut report, outcome);
    }
    Ok(report)
}

fn detmsa_suite(instances: u64, seed: u64) -> Result<SuiteReport, CliError> {
    let mut report = SuiteReport {
        lemma: "detmsa".into(),
        instances,
        conclusive: 0,
        abstained: 0,
        violations: 0,
    };
    let mut stream = KeyedStream::new(seed, 0x04);
    for replica in 0..instances {
        // Half the instances at side 16, half at 32.
        let side: i64 = if replica % 2 == 0 { 16 } else { 32 };
        let spec = EnsembleSpec::Iid(SiteDistribution::uniform(6.0, 8.0, 8.0));
        let bx = Square::new(Site::new(0, 0), side).expect("positive side");
        let mut values = sample_potential(&spec, &bx, &FrozenAssignment::new(), seed ^ 0x88, replica)
            .map_err(|e| CliError::Invalid(format!("{e}")))?
            .values()
            .to_vec();
        let defect_side = side * 3 / 4;
        let with_defect = replica % 3 != 0;
        let defects: Vec<Square> = if with_defect {
            let max_off = side - defect_side;
            let corner = Site::new(
                stream.next_index(max_off as usize + 1) as i64,
                stream.next_index(max_off as usize + 1) as i64,
            );
            let d = Square::new(corner, defect_side).unwrap();
            for site in d.sites() {
                values[bx.index_of(site).unwrap()] = stream.next_range(2.0, 4.0);
            }
            vec![d]
        } else {
            Vec::new()
        };
        let field = loclab_core::ensembles::PotentialField::from_values(bx, values);
        let h = assemble(&bx, &field).map_err(|e| CliError::Invalid(format!("{e}")))?;
        let good_side = side / 2;
        let good: Vec<Square> = aligned_subsquare_corners(&bx, good_side)
            .into_iter()
            .map(|c| Square::new(Site::new(c.0, c.1), good_side).unwrap())
            .collect();
        let l0 = side as f64;
        let scales = DetScales {
            l: [
                l0,
                l0 * 0.9,
                defect_side as f64,
                defect_side as f64 * 0.8,
                defect_side as f64 * 0.7,
                good_side as f64,
                2.5,
            ],
            nu: 0.5,
        };
        let m = 0.85;
        let report_one = deterministic_propagation(&h, &defects, &good, &scales, m, 0.05)
            .map_err(|e| CliError::Invalid(format!("{e}")))?;
        tally(&mut report, report_one.outcome);
    }
    Ok(report)
}

fn geomres_suite(instances: u64, seed: u64) -> Result<SuiteReport, CliError> {
    let mut report = SuiteReport {
        lemma: "geomres".into(),
        instances,
        conclusive: 0,
        abstained: 0,
        violations: 0,
    };
    let spec = EnsembleSpec::Iid(SiteDistribution::uniform_01());
    let outer = Square::new(Site::new(0, 0), 10).expect("positive side");
    let inner = Square::new(Site::new(3, 3), 4).expect("positive side");
    for replica in 0..instances {
        let field = sample_potential(&spec, &outer, &FrozenAssignment::new(), seed ^ 0x99, replica)
            .map_err(|e| CliError::Invalid(format!("{e}")))?;
        let h = assemble(&outer, &field).map_err(|e| CliError::Invalid(format!("{e}")))?;
        let r = geometric_resolvent_check(&h, &inner, -1.0)
            .map_err(|e| CliError::Invalid(format!("{e}")))?;
        if r.max_identity_residual <= 1e-9 && r.inequality_margin >= -1e-12 {
            report.conclusive += 1;
        } else {
            report.violations += 1;
        }
    }
    Ok(report)
}
