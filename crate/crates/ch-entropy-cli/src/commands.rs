use ch_entropy::ambient::{horizontality_report, AmbientVector};
use ch_entropy::asymptotics::{
    boundary_profile, compactification, decay_rate_fit, default_rays, default_s_list, regularity_classification,
    DecayFit, ProfileField,
};
use ch_entropy::crvolume::{cr_volume, CrVolOptions, CrVolResult, HORIZONTALITY_TOL};
use ch_entropy::entropy::{
    entropy, entropy_functional, monotonicity_q, EntropyOptions, EntropyQuery, EntropyResult, EntropySurface,
};
use ch_entropy::geometry::{poincare_rank_one, random_graph, Submanifold};
use ch_entropy::models::{dist_ch, MetricKind, ModelPoint};
use ch_entropy::zoo::{catalog, make, sphere_volume, Example, Quantity};
use ch_entropy::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::report::{num, Check, Outcome, Report, Table};
use crate::CliError;

/// Relative drop tolerated between consecutive scales of the functional.
const MONOTONE_SLACK: f64 = 1e-6;

/// Modified radius of the sampled centres in the monotonicity check.
const CENTRE_RADIUS: f64 = 0.5;

/// Modified-radius range of the interior pieces sampled for `Q`.
const Q_RANGE: (f64, f64) = (0.05, 0.9);

/// Runs one configured command. Library failures inside a numerical
/// computation come back as [`CliError::Numerical`]; a config that does not
/// fit the command is a schema error.
pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome { report: Report::new(config, Vec::new(), Value::Null), profile: None, trace: None };
    let (checks, result) = match config.command {
        Command::ListExamples => list_examples()?,
        Command::Crvol => {
            let ex = example(config)?;
            let (checks, result, trace) = crvol(config, &ex)?;
            out.trace = Some(trace);
            (checks, result)
        }
        Command::Entropy => {
            let ex = example(config)?;
            let (checks, result, trace) = entropy_cmd(config, &ex)?;
            out.trace = Some(trace);
            (checks, result)
        }
        Command::CheckTheorem2 => theorem2(config, &mut out)?,
        Command::CheckMonotonicity => {
            let ex = example(config)?;
            let (checks, result, trace) = monotonicity(config, &ex)?;
            out.trace = Some(trace);
            (checks, result)
        }
        Command::CheckRegularity => {
            let ex = example(config)?;
            let (checks, result, profile) = regularity(config, &ex)?;
            out.profile = Some(profile);
            (checks, result)
        }
        Command::CheckRankone => {
            let (checks, result, trace) = rank_one(config)?;
            out.trace = Some(trace);
            (checks, result)
        }
    };
    out.report = Report::new(config, checks, result);
    Ok(out)
}

fn example(config: &RunConfig) -> Result<Example, CliError> {
    let spec = config
        .example_spec()
        .ok_or_else(|| CliError::schema("example", format!("`{}` needs an example", config.command.as_str())))?;
    make(&spec).map_err(|e| match e {
        Error::UnknownExample(_) | Error::NotImplemented(_) => CliError::schema("example.name", e.to_string()),
        Error::Validation(_) | Error::BadAmbientLength(_) => CliError::schema("example.params", e.to_string()),
        other => CliError::Numerical(other),
    })
}

fn link_of(ex: &Example) -> Result<&Submanifold, CliError> {
    ex.link.as_ref().ok_or_else(|| CliError::schema("example.name", format!("`{}` has no link", ex.spec.name)))
}

fn surface_of(config: &RunConfig, ex: &Example, opts: &EntropyOptions) -> Result<EntropySurface, CliError> {
    let family = ex
        .family()
        .ok_or_else(|| CliError::schema("example.name", format!("`{}` has no interior part", ex.spec.name)))?;
    Ok(EntropySurface::from_family(family, config.r_max + opts.search_radius + 1.0)?)
}

fn entropy_options(config: &RunConfig) -> EntropyOptions {
    let mut opts = EntropyOptions {
        tau_min_exp: config.tau.min_exp,
        tau_max_exp: config.tau.max_exp,
        tau_points: config.tau.points,
        seed: config.seed,
        ..EntropyOptions::default()
    };
    opts.truncation.r_max = config.r_max;
    opts
}

fn coords(v: &AmbientVector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn list_examples() -> Result<(Vec<Check>, Value), CliError> {
    Ok((Vec::new(), json!({ "examples": catalog()? })))
}

/// The catalog as a table, for `list-examples --format csv`.
pub fn catalog_table() -> Result<Table, CliError> {
    let mut t = Table::new(&["name", "dim", "ambient_n", "has_link", "has_interior", "description"]);
    for e in catalog()? {
        t.push([
            e.name,
            e.dim.to_string(),
            e.ambient_n.to_string(),
            e.has_link.to_string(),
            e.has_interior.to_string(),
            e.description,
        ]);
    }
    Ok(t)
}

fn cr_volume_of(config: &RunConfig, ex: &Example) -> Result<(CrVolResult, f64), CliError> {
    let link = link_of(ex)?;
    let horizontality = horizontality_report(link, HORIZONTALITY_TOL)?;
    if !horizontality.is_horizontal {
        return Err(CliError::schema(
            "example.name",
            format!(
                "the link of `{}` is not horizontal (max |theta| = {:e}); its CR-volume is undefined",
                ex.spec.name, horizontality.max_theta
            ),
        ));
    }
    let opts = CrVolOptions { seed: config.seed, ..CrVolOptions::default() };
    Ok((cr_volume(link, &opts)?, horizontality.max_theta))
}

fn crvol(config: &RunConfig, ex: &Example) -> Result<(Vec<Check>, Value, Table), CliError> {
    let (res, max_theta) = cr_volume_of(config, ex)?;
    let mut checks = Vec::new();
    if let Some(truth) = ex.truth(Quantity::CrVolume) {
        checks.push(Check::against("cr_volume", res.value, truth));
    }
    let mut trace = Table::new(&["start", "value", "b_norm", "gradient_norm", "iterations"]);
    for (i, s) in res.starts.iter().enumerate() {
        let b_norm = s.b.iter().map(|x| x * x).sum::<f64>().sqrt();
        trace.push([i.to_string(), num(s.value), num(b_norm), num(s.gradient_norm), s.iterations.to_string()]);
    }
    let result = json!({
        "cr_volume": res.value,
        "argmax_b": res.argmax_b,
        "gradient_norm_at_argmax": res.gradient_norm_at_argmax,
        "sup_at_infinity": res.sup_at_infinity,
        "max_theta": max_theta,
        "starts": res.starts.len(),
    });
    Ok((checks, result, trace))
}

fn entropy_of(config: &RunConfig, ex: &Example) -> Result<EntropyResult, CliError> {
    let opts = entropy_options(config);
    let surface = surface_of(config, ex, &opts)?;
    Ok(entropy(&surface, &opts)?)
}

fn entropy_json(res: &EntropyResult) -> Value {
    json!({
        "entropy": res.value,
        "argmax": { "x0_modified": coords(&res.argmax.x0.to_modified()), "tau": res.argmax.tau },
        "truncation_error": res.truncation_error,
        "tail_proxy": res.tail_proxy,
        "attained_at_tail": res.attained_at_tail,
        "objective_evaluations": res.objective_evaluations,
    })
}

fn entropy_trace(res: &EntropyResult) -> Table {
    let dim = res.argmax.x0.to_modified().len();
    let mut header = vec!["tau".to_string()];
    header.extend((0..dim).map(|i| format!("x0_{i}")));
    header.extend(["value".to_string(), "truncation_error".to_string()]);
    let mut t = Table { header, rows: Vec::new() };
    for e in &res.trace {
        let mut row = vec![num(e.query.tau)];
        row.extend(e.query.x0.to_modified().iter().map(|&x| num(x)));
        row.push(e.value.map(num).unwrap_or_default());
        row.push(e.truncation_error.map(num).unwrap_or_default());
        t.push(row);
    }
    t
}

fn entropy_cmd(config: &RunConfig, ex: &Example) -> Result<(Vec<Check>, Value, Table), CliError> {
    let res = entropy_of(config, ex)?;
    let mut checks = Vec::new();
    if let Some(truth) = ex.truth(Quantity::Entropy) {
        checks.push(Check::against("entropy", res.value, truth));
    }
    Ok((checks, entropy_json(&res), entropy_trace(&res)))
}

fn theorem2(config: &RunConfig, out: &mut Outcome) -> Result<(Vec<Check>, Value), CliError> {
    let ex = example(config)?;
    let (cr, _) = cr_volume_of(config, &ex)?;
    let ent = entropy_of(config, &ex)?;
    let sphere = sphere_volume(ex.dim - 1);
    let lhs = sphere * ent.value;
    let rhs = cr.value;
    let gap = (lhs - rhs) / rhs;
    let mut checks = vec![Check::nonnegative("relative_gap", gap, config.tolerances.relative)
        .with_note("|S^{m-1}| lambda_CH >= lambda_CR")];
    if let Some(truth) = ex.truth(Quantity::Entropy) {
        checks.push(Check::against("entropy", ent.value, truth));
    }
    if let Some(truth) = ex.truth(Quantity::CrVolume) {
        checks.push(Check::against("cr_volume", cr.value, truth));
    }
    out.trace = Some(entropy_trace(&ent));
    let result = json!({
        "lhs": lhs,
        "rhs": rhs,
        "relative_gap": gap,
        "sphere_volume": sphere,
        "entropy": entropy_json(&ent),
        "cr_volume": { "value": cr.value, "argmax_b": cr.argmax_b, "sup_at_infinity": cr.sup_at_infinity },
    });
    Ok((checks, result))
}

fn random_centre(rng: &mut ChaCha8Rng, len: usize) -> Result<ModelPoint, CliError> {
    let dir = ch_entropy::crvolume::random_direction(rng, len);
    let r: f64 = rng.gen_range(0.0..CENTRE_RADIUS);
    Ok(ModelPoint::modified(dir * r)?)
}

fn monotonicity(config: &RunConfig, ex: &Example) -> Result<(Vec<Check>, Value, Table), CliError> {
    let sigma = ex.interior_submanifold(Q_RANGE).map_err(|e| CliError::schema("example.name", e.to_string()))?;
    let len = 2 * ex.ambient_n + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = Table::new(&["sample", "chart", "rho", "tau", "q"]);
    let mut min_q = f64::INFINITY;
    let mut evaluated = 0;
    let charts = sigma.charts();
    let mut attempts = 0;
    while evaluated < config.samples.monotonicity {
        attempts += 1;
        if attempts > 10 * config.samples.monotonicity.max(1) {
            return Err(CliError::Numerical(Error::Precondition("too many singular samples for Q".into())));
        }
        let c = rng.gen_range(0..charts.len());
        let chart = &charts[c];
        let u: Vec<f64> = chart.axes().iter().map(|a| rng.gen_range(a.lo..a.hi)).collect();
        let x0 = random_centre(&mut rng, len)?;
        let tau = 2f64.powf(rng.gen_range(-4.0..4.0));
        let p = ModelPoint::modified(chart.embed(&u))?;
        if dist_ch(&p, &x0) < 1e-3 {
            continue;
        }
        let terms = match monotonicity_q(chart, &u, &EntropyQuery::new(x0, tau)?) {
            Ok(t) => t,
            Err(Error::Singular(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        min_q = min_q.min(terms.q);
        trace.push([evaluated.to_string(), c.to_string(), num(terms.rho), num(tau), num(terms.q)]);
        evaluated += 1;
    }
    let mut checks = vec![Check::nonnegative("min_q", min_q, config.tolerances.q_floor)];
    let mut result = json!({ "samples": evaluated, "min_q": min_q });

    let interior = ex.interior.as_ref().expect("interior checked above");
    let horizontal_link = match &ex.link {
        Some(link) => horizontality_report(link, HORIZONTALITY_TOL)?.is_horizontal,
        None => false,
    };
    if interior.is_cone && horizontal_link {
        // isotropic cone about its vertex: Q vanishes identically
        let origin = ModelPoint::modified(AmbientVector::zeros(len))?;
        let mut max_abs: f64 = 0.0;
        for _ in 0..config.samples.monotonicity.min(50) {
            let chart = &charts[rng.gen_range(0..charts.len())];
            let u: Vec<f64> = chart.axes().iter().map(|a| rng.gen_range(a.lo..a.hi)).collect();
            let tau = 2f64.powf(rng.gen_range(-4.0..4.0));
            match monotonicity_q(chart, &u, &EntropyQuery::new(origin.clone(), tau)?) {
                Ok(t) => max_abs = max_abs.max(t.q.abs()),
                Err(Error::Singular(_)) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        checks.push(Check::at_most("max_abs_q_about_vertex", max_abs, config.tolerances.q_floor));
        result["max_abs_q_about_vertex"] = json!(max_abs);
    }

    if ex.minimal_in == Some(MetricKind::ModifiedBergman) {
        let opts = entropy_options(config);
        let surface = surface_of(config, ex, &opts)?;
        let x0 = random_centre(&mut rng, len)?;
        let mut values = Vec::new();
        for tau in opts.tau_grid().into_iter().take(config.samples.monotone_scales) {
            match entropy_functional(&surface, &EntropyQuery::new(x0.clone(), tau)?, &opts.truncation) {
                Ok(v) => values.push((tau, v.value)),
                Err(Error::Truncation { .. }) => break,
                Err(e) => return Err(e.into()),
            }
        }
        let drop = values.windows(2).map(|w| (w[0].1 - w[1].1) / w[0].1).fold(0.0, f64::max);
        checks.push(Check::at_most("max_relative_drop_in_tau", drop, MONOTONE_SLACK));
        result["functional_along_tau"] = json!({
            "x0_modified": coords(&x0.to_modified()),
            "tau": values.iter().map(|v| v.0).collect::<Vec<_>>(),
            "value": values.iter().map(|v| v.1).collect::<Vec<_>>(),
        });
    }
    Ok((checks, result, trace))
}

fn fit_json(fit: &DecayFit) -> Value {
    serde_json::to_value(fit).expect("fit serializes")
}

fn regularity(config: &RunConfig, ex: &Example) -> Result<(Vec<Check>, Value, Table), CliError> {
    let family = ex
        .family()
        .ok_or_else(|| CliError::schema("example.name", format!("`{}` has no interior part", ex.spec.name)))?;
    let sigma = compactification(family, 0.3)?;
    let tol = config.tolerances.witness;
    let flags = regularity_classification(&sigma, tol)?;
    let s_list = default_s_list();
    let mut profile = Table::new(&["ray", "chart", "s", "t_top", "x_perp", "theta_residual"]);
    let mut rays = Vec::new();
    let mut min_slope = f64::INFINITY;
    for (i, ray) in default_rays(&sigma, 3).iter().enumerate() {
        let p = boundary_profile(&sigma, ray, &s_list)?;
        for s in &p.samples {
            profile.push([
                i.to_string(),
                ray.chart.to_string(),
                num(s.s),
                num(s.t_top_norm),
                num(s.x_perp_norm),
                num(s.theta_residual),
            ]);
        }
        let t_fit = decay_rate_fit(&p, ProfileField::TTop)?;
        let x_fit = decay_rate_fit(&p, ProfileField::XPerp)?;
        if let Some(s) = t_fit.slope() {
            min_slope = min_slope.min(s);
        }
        rays.push(json!({
            "chart": ray.chart,
            "link_coords": ray.link_coords,
            "t_top": fit_json(&t_fit),
            "x_perp": fit_json(&x_fit),
        }));
    }
    let mut checks = Vec::new();
    if ex.minimal_in == Some(MetricKind::ModifiedBergman) && flags.weakly_horizontal {
        // minimal and weakly horizontal: quasi-normal, strongly horizontal,
        // and T^T = O((1 - s)^2)
        checks.push(Check::at_most("x_perp_limit", flags.x_perp_limit, tol));
        checks.push(Check::at_most("strongly_horizontal_witness", flags.strongly_horizontal_witness, tol));
        if min_slope.is_finite() {
            let window = config.tolerances.slope_window;
            checks.push(
                Check::nonnegative("t_top_slope_excess", min_slope - 2.0, window)
                    .with_note("least T^T decay rate minus 2"),
            );
        }
    }
    let result = json!({
        "flags": flags,
        "strongly_horizontal": flags.strongly_horizontal(tol),
        "min_t_top_slope": if min_slope.is_finite() { Some(min_slope) } else { None },
        "rays": rays,
    });
    Ok((checks, result, profile))
}

fn rank_one(config: &RunConfig) -> Result<(Vec<Check>, Value, Table), CliError> {
    let data = poincare_rank_one();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = Table::new(&[
        "chart",
        "second_ff_normal",
        "second_ff_reeb",
        "mean_normal",
        "mean_reeb",
        "second_ff_reeb_uncorrected",
        "mean_reeb_uncorrected",
    ]);
    let mut worst: f64 = 0.0;
    let mut worst_uncorrected: f64 = 0.0;
    for i in 0..config.samples.rank_one_charts {
        let chart = random_graph(&mut rng);
        let u = [rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15)];
        let r = ch_entropy::geometry::rank_one_second_ff(&data, &chart, &u)?;
        worst = worst.max(r.max());
        worst_uncorrected = worst_uncorrected.max(r.second_ff_reeb_uncorrected.max(r.mean_reeb_uncorrected));
        trace.push([
            i.to_string(),
            num(r.second_ff_normal),
            num(r.second_ff_reeb),
            num(r.mean_normal),
            num(r.mean_reeb),
            num(r.second_ff_reeb_uncorrected),
            num(r.mean_reeb_uncorrected),
        ]);
    }
    let checks = vec![Check::at_most("max_relative_residual", worst, config.tolerances.rank_one)];
    let result = json!({
        "charts": config.samples.rank_one_charts,
        "max_relative_residual": worst,
        "max_uncorrected_reeb_residual": worst_uncorrected,
    });
    Ok((checks, result, trace))
}
