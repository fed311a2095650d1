//! Named worked examples with their stated values and checks.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde_json::Value;

use mdlsys::catalog;
use mdlsys::combinatorics::MultiIndex;
use mdlsys::kernels::{ab_kernel_eval, kernel_gram, KernelFlavor, KernelHandle};
use mdlsys::numerics::{c, identity, psd_check, r, real_matrix, CMat, CVec};
use mdlsys::sampling::{ball_points, seeded};
use mdlsys::spaces::{
    gleason_check, gleason_from_pair, hankel_rationality_probe_exact, odd_ratio_sequence,
    HANKEL_RANK_THRESHOLD,
};
use mdlsys::stein::{
    ab_gramian, nc_gramian, observability_analysis, observability_span, reverse_stein_residual,
    DEFAULT_MAX_LEVEL,
};
use mdlsys::systems::{resolvent_determinant_coeffs, resolvent_row};

use crate::canonical::{matrix, num, obj};
use crate::commands::{Options, Outcome};
use crate::error::CliError;
use crate::expr::{self, Params};
use crate::report::Checks;

pub const REGISTRY: [(&str, &str); 7] = [
    (
        "reverse-stein",
        "abelianized gramian of a noncommuting pair against the stated Stein difference",
    ),
    (
        "a-stable",
        "output stable after abelianization, divergent word gramian",
    ),
    (
        "a-obs",
        "observable pair with abelianized unobservable vector e_2",
    ),
    (
        "not-shift-inv",
        "two-dimensional model space with closed-form kernel, not backward-shift invariant",
    ),
    (
        "hankel",
        "Hankel sections of s_k = (k+1)/(2k+1) have full rank through n = 8",
    ),
    (
        "e331",
        "Gleason solutions for realizations of span{1, λ_1, λ_2}",
    ),
    (
        "e332",
        "Gleason solutions for realizations of span{4, λ_1, λ_2}/(4 - λ_1 λ_2)",
    ),
];

fn max_entry(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn run(id: &str, opts: &Options) -> Result<Outcome, CliError> {
    let Some((_, description)) = REGISTRY.iter().find(|(k, _)| *k == id) else {
        let known: Vec<&str> = REGISTRY.iter().map(|(k, _)| *k).collect();
        return Err(CliError::Input(format!(
            "unknown example {id:?}; known examples: {}",
            known.join(", ")
        )));
    };
    let mut checks = Checks::new();
    let mut data = serde_json::Map::new();
    match id {
        "reverse-stein" => reverse_stein(&mut checks, &mut data)?,
        "a-stable" => a_stable(&mut checks, opts)?,
        "a-obs" => a_obs(&mut checks, &mut data)?,
        "not-shift-inv" => not_shift_inv(&mut checks, opts)?,
        "hankel" => hankel(&mut checks, &mut data)?,
        "e331" => e331(&mut checks, opts)?,
        _ => e332(&mut checks, opts)?,
    }
    let pass = checks.pass;
    data.insert("id".into(), id.into());
    data.insert("description".into(), (*description).into());
    data.insert("checks".into(), checks.into_value());
    data.insert(
        "verdict".into(),
        (if pass { "PASS" } else { "FAIL" }).into(),
    );
    let mut out = Outcome {
        sections: serde_json::Map::new(),
        pass,
    };
    out.sections.insert("example".into(), Value::Object(data));
    Ok(out)
}

fn reverse_stein(
    checks: &mut Checks,
    data: &mut serde_json::Map<String, Value>,
) -> Result<(), CliError> {
    let pair = catalog::reverse_stein();
    let ga = ab_gramian(&pair, DEFAULT_MAX_LEVEL, 1e-12);
    checks.flag("gramianConverged", ga.converged(), ga.levels_used.into());
    let rs = reverse_stein_residual(&pair, &ga, 1e-9)?;
    let stated = real_matrix(&[
        &[7.0 / 8.0, 5.0 / 8.0, 3.0 / 8.0],
        &[5.0 / 8.0, 0.0, 0.25],
        &[3.0 / 8.0, 0.25, 0.0],
    ]);
    checks.at_most(
        "maxEntryError",
        max_entry(&(&rs.stein_difference - &stated)),
        1e-6,
    );
    let computed_psd = psd_check(&rs.stein_difference, 1e-9)?;
    checks.flag(
        "notPsd",
        !computed_psd.is_psd,
        num(computed_psd.min_eigenvalue),
    );
    data.insert("gramian".into(), matrix(&ga.value));
    data.insert("steinDifference".into(), matrix(&rs.stein_difference));
    data.insert("stated".into(), matrix(&stated));
    data.insert("statedPsd".into(), psd_check(&stated, 1e-9)?.is_psd.into());
    Ok(())
}

fn a_stable(checks: &mut Checks, opts: &Options) -> Result<(), CliError> {
    let pair = catalog::a_stable();
    let mut err: f64 = 0.0;
    for lambda in ball_points(&mut seeded(opts.seed), 2, 5, 0.99) {
        let row = resolvent_row(&pair, &lambda)?;
        let expected = CMat::from_row_slice(1, 3, &[r(1.0), lambda[0] * 2.0, lambda[1] * 2.0]);
        err = err.max(max_entry(&(row - expected)));
    }
    checks.at_most("resolventRowError", err, 1e-12);
    let ga = ab_gramian(&pair, DEFAULT_MAX_LEVEL, 1e-9);
    checks.flag(
        "abelianizedConvergent",
        ga.converged(),
        ga.verdict.as_str().into(),
    );
    let g = nc_gramian(&pair, DEFAULT_MAX_LEVEL, 1e-9);
    checks.flag(
        "wordGramianDivergent",
        g.verdict.as_str() == "divergent",
        g.verdict.as_str().into(),
    );
    let at12 = g
        .partial_sum_norms
        .get(12)
        .copied()
        .unwrap_or(f64::INFINITY);
    checks.flag("partialSumAtLevel12Exceeds1e3", at12 > 1e3, num(at12));
    Ok(())
}

fn a_obs(checks: &mut Checks, data: &mut serde_json::Map<String, Value>) -> Result<(), CliError> {
    let pair = catalog::a_obs();
    let prod = &pair.c * &pair.a[0] * &pair.a[1];
    let stated = [-1.0 / 128.0, 1.0 / 256.0, -1.0 / 256.0, 0.0];
    let err = (0..4)
        .map(|i| (prod[(0, i)] - r(stated[i])).norm())
        .fold(0.0, f64::max);
    checks.at_most("ca1a2Error", err, 1e-12);
    let (_, ranks) = observability_span(&pair, 1e-12);
    let rank = ranks.iter().take(4).copied().max().unwrap_or(0);
    checks.flag("observableByLength3", rank == 4, rank.into());
    let ga = ab_gramian(&pair, DEFAULT_MAX_LEVEL, 1e-14);
    let mut e2 = CVec::zeros(4);
    e2[1] = r(1.0);
    checks.at_most("gramianKillsE2", (&ga.value * &e2).norm(), 1e-12);
    let obs = observability_analysis(&pair, 20, 1e-9);
    checks.flag("observable", obs.observable, obs.observable.into());
    checks.flag("notAObservable", !obs.a_observable, obs.a_observable.into());
    let basis = &obs.a_unobservable_basis;
    let along_e2 = if basis.ncols() == 1 {
        (basis.adjoint() * &e2)[0].norm()
    } else {
        0.0
    };
    checks.at_most("kernelBasisOffE2", 1.0 - along_e2, 1e-9);
    let stated_det: [(&[usize], f64); 8] = [
        (&[0, 0], 1.0),
        (&[1, 0], -1.0 / 16.0),
        (&[1, 1], 1.0 / 128.0),
        (&[2, 1], -1.0 / 2048.0),
        (&[0, 2], -1.0 / 64.0),
        (&[1, 2], 1.0 / 2048.0),
        (&[1, 3], -1.0 / 16384.0),
        (&[0, 4], 1.0 / 16384.0),
    ];
    let listed: BTreeMap<MultiIndex, f64> = stated_det
        .iter()
        .map(|(n, v)| (MultiIndex::new(n.to_vec()), *v))
        .collect();
    let coeffs = resolvent_determinant_coeffs(&pair.a);
    let det_err = coeffs
        .iter()
        .map(|(n, v)| (v - r(listed.get(n).copied().unwrap_or(0.0))).norm())
        .chain(
            listed
                .iter()
                .map(|(n, v)| if coeffs.contains_key(n) { 0.0 } else { v.abs() }),
        )
        .fold(0.0, f64::max);
    checks.at_most("determinantCoefficientError", det_err, 1e-12);
    data.insert("aUnobservableBasis".into(), matrix(basis));
    Ok(())
}

fn not_shift_inv(checks: &mut Checks, opts: &Options) -> Result<(), CliError> {
    let pair = catalog::not_shift_inv();
    let kh = KernelHandle::new(pair.clone(), None, KernelFlavor::Commutative, 1e-9)?;
    let zero = [c(0.0, 0.0), c(0.0, 0.0)];
    let at_zero = ab_kernel_eval(&kh, &zero, &zero)?;
    checks.at_most(
        "kernelAtOrigin",
        max_entry(&(at_zero - identity(2) * r(0.75))),
        1e-12,
    );
    let pts = ball_points(&mut seeded(opts.seed), 2, 11, 0.95);
    let mut err: f64 = 0.0;
    for w in pts.windows(2) {
        let (l, z) = (&w[0], &w[1]);
        let got = ab_kernel_eval(&kh, l, z)?;
        let two = c(2.0, 0.0);
        let left = CMat::from_row_slice(2, 2, &[two, l[1], l[0], two]);
        let right = CMat::from_row_slice(2, 2, &[two, z[0].conj(), z[1].conj(), two]);
        let f =
            c(3.0, 0.0) / ((c(4.0, 0.0) - l[0] * l[1]) * (c(4.0, 0.0) - z[0].conj() * z[1].conj()));
        err = err.max(max_entry(&(got - left * right * f)));
    }
    checks.at_most("closedFormKernelError", err, 1e-10);
    let gram = kernel_gram(&kh, &pts[..6], 1e-9)?;
    checks.flag("gramPsd", gram.is_psd, num(gram.min_eigenvalue));
    let sol = gleason_from_pair(&pair, 8, 1e-9)?;
    let check = gleason_check(&sol, 1e-9)?;
    checks.flag(
        "gleasonSolves",
        check.solves,
        num(check.coefficient_residual.max(sol.sample_residual)),
    );
    checks.flag(
        "notBackshift",
        !check.equals_backshift,
        num(check.backshift_residual),
    );
    Ok(())
}

fn hankel(checks: &mut Checks, data: &mut serde_json::Map<String, Value>) -> Result<(), CliError> {
    let rep = hankel_rationality_probe_exact(&odd_ratio_sequence(17), 8)?;
    let exact = rep.exact_full_rank == Some(true);
    checks.flag("exactFullRankThrough8", exact, exact.into());
    let smallest = rep
        .sections
        .iter()
        .map(|s| s.smallest_scaled_singular_value)
        .fold(f64::INFINITY, f64::min);
    let sections: Vec<Value> = rep
        .sections
        .iter()
        .map(|s| {
            obj([
                ("k", s.k.into()),
                ("rank", s.rank.into()),
                (
                    "exactRank",
                    s.exact_rank.map(Value::from).unwrap_or(Value::Null),
                ),
                ("smallestSingularValue", num(s.smallest_singular_value)),
                (
                    "smallestScaledSingularValue",
                    num(s.smallest_scaled_singular_value),
                ),
            ])
        })
        .collect();
    // the numerical rank test is reported, not enforced: the smallest
    // scaled singular value of H_8 sits below the threshold in double precision
    data.insert(
        "numerical".into(),
        obj([
            ("fullRank", rep.full_rank.into()),
            ("minScaledSingularValue", num(smallest)),
            ("threshold", num(HANKEL_RANK_THRESHOLD)),
            ("sections", Value::Array(sections)),
        ]),
    );
    Ok(())
}

fn a_values(opts: &Options, defaults: &[Complex64]) -> Result<Vec<Complex64>, CliError> {
    let given: Vec<&(String, String)> = opts.params.iter().filter(|(k, _)| k == "a").collect();
    if given.is_empty() {
        return Ok(defaults.to_vec());
    }
    given
        .iter()
        .map(|(_, text)| expr::eval(text, &Params::new()))
        .collect()
}

fn gleason_family(
    checks: &mut Checks,
    family: fn(Complex64) -> mdlsys::systems::OutputPair,
    degree: usize,
    values: &[Complex64],
    expect_contractive: bool,
) -> Result<(), CliError> {
    for a in values {
        let label = format!("a={a}");
        let sol = gleason_from_pair(&family(*a), degree, 1e-9)?;
        let check = gleason_check(&sol, 1e-9)?;
        checks.at_most(
            &format!("{label} residual"),
            check.coefficient_residual.max(sol.sample_residual),
            1e-12,
        );
        if expect_contractive {
            let expected = a.norm() == 0.0;
            checks.flag(
                &format!("{label} contractive iff a = 0"),
                check.contractive == expected,
                check.contractive.into(),
            );
        }
    }
    Ok(())
}

fn e331(checks: &mut Checks, opts: &Options) -> Result<(), CliError> {
    let values = a_values(opts, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 2.0)])?;
    gleason_family(checks, catalog::linear_span_family, 6, &values, true)
}

fn e332(checks: &mut Checks, opts: &Options) -> Result<(), CliError> {
    let values = a_values(opts, &[c(0.0, 0.0), c(1.0, 0.0)])?;
    gleason_family(checks, catalog::rational_span_family, 10, &values, false)
}
