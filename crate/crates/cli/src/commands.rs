use nalgebra::DMatrix;
use serde_json::json;
use ssdss::analysis::{self, differentiate, eval_frf, integrate, poles_report};
use ssdss::bench::{make_assembly_analog, perturb, six_dof_truncated};
use ssdss::frf::{frf_reweight, log_grid};
use ssdss::io::{write_file, Meta};
use ssdss::modal::{build_full, modal_frf, rcm_quality, to_real_form};
use ssdss::stabilize::{StabilizeOptions, Weighting};
use ssdss::timesim::{
    foh_discretize, max_natural_frequency_hz, rms_deviation, simulate_many, sweep_signal, unfaded_range,
};
use ssdss::types::{hz_to_rad, rad_to_hz};
use ssdss::{Domain, FrfSet, InterfaceMap, ModalModel, RcmConfig, StateSpaceModel};
use std::path::{Path, PathBuf};

use crate::error::{usage, CliError, CliResult};
use crate::util::{document_kind, sibling, write_text, IndexList, Inputs, Sweep};
use crate::Global;

/// RCM settings used when none are given: 0.1 Hz, 15 kHz, 15 kHz, ξ = 0.1.
fn default_rcm() -> RcmConfig {
    RcmConfig::new(hz_to_rad(0.1), 0.1, hz_to_rad(1.5e4), 0.1, hz_to_rad(1.5e4), 0.1).expect("valid defaults")
}

/// Nine significant digits, without trailing zeros.
fn short(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    format!("{rounded}")
}

fn rcm_header(cfg: &RcmConfig) -> String {
    let mut s = format!(
        "rcm: omega_lr_hz={} omega_ur_hz={} omega_cb_hz={}",
        short(rad_to_hz(cfg.omega_lr)),
        short(rad_to_hz(cfg.omega_ur)),
        short(rad_to_hz(cfg.omega_cb))
    );
    if cfg.xi_lr == cfg.xi_ur && cfg.xi_ur == cfg.xi_cb {
        s += &format!(" xi={}", short(cfg.xi_lr));
    } else {
        s += &format!(" xi_lr={} xi_ur={} xi_cb={}", short(cfg.xi_lr), short(cfg.xi_ur), short(cfg.xi_cb));
    }
    s
}

fn read_rcm(inputs: &mut Inputs, path: Option<&Path>) -> CliResult<Option<RcmConfig>> {
    path.map(|p| inputs.read::<RcmConfig>(p)).transpose()
}

fn rcm_meta(cfg: &RcmConfig) -> serde_json::Value {
    json!({
        "omega_lr_hz": rad_to_hz(cfg.omega_lr), "xi_lr": cfg.xi_lr,
        "omega_ur_hz": rad_to_hz(cfg.omega_ur), "xi_ur": cfg.xi_ur,
        "omega_cb_hz": rad_to_hz(cfg.omega_cb), "xi_cb": cfg.xi_cb,
    })
}

pub fn build(g: &Global, modal: &Path, rcm: Option<&Path>, newton: bool, real_form: bool, out: &Path) -> CliResult<()> {
    let mut inputs = Inputs::new();
    let mm: ModalModel = inputs.read(modal)?;
    let cfg = read_rcm(&mut inputs, rcm)?.unwrap_or_else(default_rcm);
    println!("{}", rcm_header(&cfg));
    let mut model = build_full(&mm, &cfg, newton)?;
    if real_form {
        model = to_real_form(&model)?;
    }
    let (max_cb, scale) = (model.max_abs_cb(), model.cb_scale());
    let q = rcm_quality(&mm, &cfg, &g.band.grid(g.points)?)?;
    println!("states={} outputs={} inputs={}", model.n_states(), model.n_outputs(), model.n_inputs());
    println!("max_cb={max_cb:.3e} cb_scale={scale:.3e}");
    if newton && max_cb > g.tol * scale.max(f64::MIN_POSITIVE) {
        log::warn!("max |C·B| exceeds tol × scale ({:.1e})", g.tol);
    }
    println!("rcm_max_rel_dev: ur={:.3e} lr={:.3e} cb={:.3e}", q.max_ur(), q.max_lr(), q.max_cb());
    let meta = inputs.meta("build", [("rcm", rcm_meta(&cfg)), ("newton", json!(newton))]);
    write_file(out, &model, &meta)?;
    Ok(())
}

fn keep_io(model: StateSpaceModel, keep: Option<&IndexList>) -> CliResult<StateSpaceModel> {
    match keep {
        Some(k) => Ok(model.select_io(&k.0, &k.0)?),
        None => Ok(model),
    }
}

/// Writes the model and its pole table and prints the pole summary.
fn write_with_poles(model: &StateSpaceModel, meta: &Meta, out: &Path, poles_out: Option<&Path>) -> CliResult<()> {
    let p = analysis::poles(model)?;
    let (csv, n_unstable) = poles_report(&p)?;
    write_file(out, model, meta)?;
    let poles_path = poles_out.map(Path::to_path_buf).unwrap_or_else(|| sibling(out, "poles.csv"));
    write_text(&poles_path, &csv)?;
    println!("{} poles, {} unstable", p.len(), n_unstable);
    Ok(())
}

pub fn couple(
    models: &[PathBuf],
    map: &Path,
    keep: Option<&IndexList>,
    out: &Path,
    poles_out: Option<&Path>,
) -> CliResult<()> {
    let mut inputs = Inputs::new();
    let parts = models.iter().map(|p| inputs.read::<StateSpaceModel>(p)).collect::<CliResult<Vec<_>>>()?;
    let map: InterfaceMap = inputs.read(map)?;
    if map.is_empty() {
        log::info!("empty interface map: models are concatenated");
    }
    let coupled = keep_io(ssdss::coupling::lm_couple(&parts, &map)?, keep)?;
    write_with_poles(&coupled, &inputs.meta("couple", []), out, poles_out)
}

pub fn decouple(
    assembly: &Path,
    subtract: &[PathBuf],
    map: &Path,
    keep: Option<&IndexList>,
    out: &Path,
    poles_out: Option<&Path>,
) -> CliResult<()> {
    let mut inputs = Inputs::new();
    let asm: StateSpaceModel = inputs.read(assembly)?;
    let subs = subtract.iter().map(|p| inputs.read::<StateSpaceModel>(p)).collect::<CliResult<Vec<_>>>()?;
    let map: InterfaceMap = inputs.read(map)?;
    let model = keep_io(ssdss::coupling::lm_decouple(&asm, &subs, &map)?, keep)?;
    write_with_poles(&model, &inputs.meta("decouple", []), out, poles_out)
}

pub fn stabilize(
    g: &Global,
    model: &Path,
    weighting: &str,
    rcm: Option<&Path>,
    out: &Path,
    diagnostics: Option<&Path>,
) -> CliResult<()> {
    let weighting: Weighting = weighting.parse()?;
    let mut inputs = Inputs::new();
    let m: StateSpaceModel = inputs.read(model)?;
    let rcm = read_rcm(&mut inputs, rcm)?;
    let grid = g.band.grid(g.points)?;
    let st = ssdss::stabilize::stabilize(&m, &grid, &StabilizeOptions { weighting, rcm })?;
    let d = &st.diagnostics;
    println!("{} poles, {} unstable", d.n_poles, d.n_unstable);
    if d.no_op {
        println!("no unstable poles; model written unchanged");
    } else {
        let bound = 6 * m.n_outputs().min(m.n_inputs());
        println!("{:+} states (≤ 6·min(no, ni) = {bound})", d.added_states());
        println!("frf deviation ({}): {:.3e}", d.deviation_domain, d.frf_rel_rms_deviation);
    }
    let meta = inputs.meta("stabilize", [("weighting", json!(weighting.to_string()))]);
    write_file(out, &st.model, &meta)?;
    let diag_path = diagnostics.map(Path::to_path_buf).unwrap_or_else(|| sibling(out, "diagnostics.json"));
    write_text(&diag_path, &(serde_json::to_string_pretty(d)? + "\n"))?;
    Ok(())
}

/// Differentiates or integrates `m` until it is in `domain`.
fn to_domain(m: &StateSpaceModel, domain: Domain) -> CliResult<StateSpaceModel> {
    let mut m = m.clone();
    while m.domain().order() < domain.order() {
        m = differentiate(&m)?;
    }
    while m.domain().order() > domain.order() {
        m = integrate(&m)?;
    }
    Ok(m)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    model: &Path,
    fs_hz: Option<f64>,
    sweep: &Sweep,
    fade: f64,
    input: usize,
    domain: &str,
    reference: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    let domain: Domain = domain.parse()?;
    let mut inputs = Inputs::new();
    let prepare = |m: StateSpaceModel| -> CliResult<StateSpaceModel> {
        let m = to_domain(&m, domain)?;
        if input >= m.n_inputs() {
            return Err(usage(format!("--input {input} out of range for {} inputs", m.n_inputs())));
        }
        let outputs: Vec<usize> = (0..m.n_outputs()).collect();
        Ok(m.select_io(&outputs, &[input])?)
    };
    let m = prepare(inputs.read(model)?)?;
    let r = reference.map(|p| inputs.read(p).and_then(prepare)).transpose()?;
    let fs = match fs_hz {
        Some(f) if f > 0.0 && f.is_finite() => f,
        Some(f) => return Err(usage(format!("--fs-hz must be positive, got {f}"))),
        None => 2.5 * max_natural_frequency_hz(&m)?,
    };
    println!("fs_hz={}", short(fs));
    let u = sweep_signal(sweep.f0, sweep.f1, sweep.duration, fs, fade)?;
    let u = DMatrix::from_row_slice(1, u.len(), &u);
    let dm = foh_discretize(&m, fs)?;
    let dr = r.as_ref().map(|r| foh_discretize(r, fs)).transpose()?;
    let mut jobs = vec![(&dm, &u)];
    if let Some(dr) = &dr {
        jobs.push((dr, &u));
    }
    let sims = simulate_many(&jobs)?;

    let mut w = csv::Writer::from_path(out)?;
    let mut header = vec!["t".to_string(), format!("u_{input}")];
    header.extend((0..m.n_outputs()).map(|k| format!("y_{k}")));
    if dr.is_some() {
        header.extend((0..m.n_outputs()).map(|k| format!("yref_{k}")));
    }
    w.write_record(&header)?;
    let n = sims.iter().map(|s| s.outputs.ncols()).min().unwrap_or(0);
    for k in 0..n {
        let mut row = vec![format!("{:e}", k as f64 / fs), format!("{:e}", u[(0, k)])];
        for s in &sims {
            row.extend(s.outputs.column(k).iter().map(|y| format!("{y:e}")));
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    for (s, what) in sims.iter().zip(["model", "reference"]) {
        if let Some(k) = s.diverged_at {
            return Err(CliError::Diverged(format!("{what} diverged at sample {k} (t = {:.4e} s)", k as f64 / fs)));
        }
    }
    if sims.len() == 2 {
        let dev = rms_deviation(&sims[0].outputs, &sims[1].outputs, unfaded_range(u.ncols(), fade))?;
        println!("rms deviation from reference: {dev:.3e}");
    }
    Ok(())
}

/// FRFs of any source kind, brought to `domain` on `grid` (rad/s).
fn source_frf(inputs: &mut Inputs, path: &Path, grid: &[f64]) -> CliResult<FrfSet> {
    Ok(match document_kind(path)?.as_str() {
        "modal-model" => modal_frf(&inputs.read::<ModalModel>(path)?, grid)?,
        "state-space" => eval_frf(&inputs.read::<StateSpaceModel>(path)?, grid)?,
        "frf-set" => inputs.read::<FrfSet>(path)?,
        other => return Err(usage(format!("{}: cannot compare a '{other}' document", path.display()))),
    })
}

pub fn compare(g: &Global, sources: &[PathBuf], entry: &IndexList, domain: Option<&str>, out: &Path) -> CliResult<()> {
    let &[row, col] = entry.0.as_slice() else {
        return Err(usage("--entry takes `output,input`"));
    };
    let mut inputs = Inputs::new();
    // FRF sets fix the grid; models are evaluated on it.
    let mut grid = g.band.grid(g.points)?;
    for p in sources {
        if document_kind(p)? == "frf-set" {
            let (f, _) = ssdss::io::read_file::<FrfSet>(p)?;
            grid = f.grid().to_vec();
            break;
        }
    }
    let mut frfs = sources.iter().map(|p| source_frf(&mut inputs, p, &grid)).collect::<CliResult<Vec<_>>>()?;
    let target: Domain = match domain {
        Some(d) => d.parse()?,
        None => frfs[0].domain(),
    };
    for (f, p) in frfs.iter_mut().zip(sources) {
        if f.grid() != grid.as_slice() {
            return Err(usage(format!("{}: frequency lines differ from the other sources", p.display())));
        }
        let k = target.order() - f.domain().order();
        if k != 0 {
            *f = frf_reweight(f, k)?;
        }
        let (no, ni) = f.shape();
        if row >= no || col >= ni {
            return Err(usage(format!("{}: entry ({row}, {col}) outside {no}×{ni}", p.display())));
        }
    }
    let shape = frfs[0].shape();
    if let Some((f, p)) = frfs.iter().zip(sources).find(|(f, _)| f.shape() != shape) {
        return Err(usage(format!("{}: shape {:?} differs from {:?}", p.display(), f.shape(), shape)));
    }

    let mut w = csv::Writer::from_path(out)?;
    let mut header = vec!["f_hz".to_string()];
    for k in 0..frfs.len() {
        header.push(format!("src{k}_mag"));
        header.push(format!("src{k}_phase_deg"));
    }
    header.extend((1..frfs.len()).map(|k| format!("reldev{k}")));
    w.write_record(&header)?;
    let mut worst = vec![0.0f64; frfs.len()];
    for (i, &omega) in grid.iter().enumerate() {
        let mut rec = vec![format!("{:e}", rad_to_hz(omega))];
        for f in &frfs {
            let h = f.values()[i][(row, col)];
            rec.push(format!("{:e}", h.norm()));
            rec.push(format!("{:e}", h.arg().to_degrees()));
        }
        let reference = &frfs[0].values()[i];
        for (k, f) in frfs.iter().enumerate().skip(1) {
            let scale = reference.norm();
            let dev = (&f.values()[i] - reference).norm();
            let rel = if scale > 0.0 { dev / scale } else { dev };
            worst[k] = worst[k].max(rel);
            rec.push(format!("{rel:e}"));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    for (k, p) in sources.iter().enumerate().skip(1) {
        let verdict = if worst[k] <= g.tol { "within" } else { "exceeds" };
        println!("{}: max reldev {:.3e} ({verdict} tol {:.1e})", p.display(), worst[k], g.tol);
    }
    Ok(())
}

pub fn bench_export(g: &Global, out_dir: &Path, rel: f64) -> CliResult<()> {
    std::fs::create_dir_all(out_dir)?;
    let fx = make_assembly_analog();
    let meta = |what: &str| -> Meta {
        let mut m = Meta::new();
        m.insert("tool".into(), json!(format!("ssdss {}", env!("CARGO_PKG_VERSION"))));
        m.insert("command".into(), json!("bench export"));
        m.insert("fixture".into(), json!(what));
        m
    };
    let mut written = Vec::new();
    let mut put = |name: String, f: &dyn Fn(&Path) -> ssdss::Result<()>| -> CliResult<()> {
        let path = out_dir.join(&name);
        f(&path)?;
        written.push(name);
        Ok(())
    };
    for s in [&fx.alu_a, &fx.alu_b, &fx.steel_a, &fx.steel_b, &fx.mount, &fx.assembly_a, &fx.assembly_b] {
        let m = s.modal()?;
        put(format!("{}.json", s.name), &|p| write_file(p, &m, &meta(&s.name)))?;
    }
    let perturbed = perturb(&fx.assembly_a.modal()?, rel, g.seed)?;
    let mut pm = meta("assembly-a perturbed");
    pm.insert("rel".into(), json!(rel));
    pm.insert("seed".into(), json!(g.seed));
    put("assembly-a-perturbed.json".into(), &|p| write_file(p, &perturbed, &pm))?;
    put("decouple-map.json".into(), &|p| write_file(p, &fx.decouple_map, &meta("decouple map")))?;
    put("couple-map.json".into(), &|p| write_file(p, &fx.couple_map, &meta("couple map")))?;
    put("rcm-config.json".into(), &|p| write_file(p, &fx.rcm_config(), &meta("rcm config")))?;
    let six = six_dof_truncated()?;
    put("six-dof-truncated.json".into(), &|p| write_file(p, &six, &meta("six-dof truncated")))?;
    let b = &fx.assembly_b;
    let reference = b.system.first_order(&b.io)?;
    put("assembly-b-reference.json".into(), &|p| write_file(p, &reference, &meta("assembly-b first-order")))?;
    let grid = log_grid(fx.band.0, fx.band.1, g.points.max(2));
    let receptance = b.receptance(&grid)?;
    put("assembly-b-receptance.json".into(), &|p| write_file(p, &receptance, &meta("assembly-b receptance")))?;
    for name in &written {
        println!("{}", out_dir.join(name).display());
    }
    Ok(())
}

pub fn poles(model: &Path, out: Option<&Path>) -> CliResult<()> {
    let mut inputs = Inputs::new();
    let m: StateSpaceModel = inputs.read(model)?;
    let p = analysis::poles(&m)?;
    let (csv, n_unstable) = poles_report(&p)?;
    match out {
        Some(path) => {
            write_text(path, &csv)?;
            println!("{} poles, {} unstable", p.len(), n_unstable);
        }
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn rcm_report(g: &Global, modal: &Path, rcm: Option<&Path>, out: &Path) -> CliResult<()> {
    let mut inputs = Inputs::new();
    let mm: ModalModel = inputs.read(modal)?;
    let cfg = read_rcm(&mut inputs, rcm)?.unwrap_or_else(default_rcm);
    println!("{}", rcm_header(&cfg));
    let q = rcm_quality(&mm, &cfg, &g.band.grid(g.points)?)?;
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["f_hz", "max_rel_dev_UR", "max_rel_dev_LR", "max_rel_dev_CB"])?;
    for (i, &omega) in q.grid.iter().enumerate() {
        w.write_record([rad_to_hz(omega), q.ur[i], q.lr[i], q.cb[i]].map(|x| format!("{x:e}")))?;
    }
    w.flush()?;
    println!("rcm_max_rel_dev: ur={:.3e} lr={:.3e} cb={:.3e}", q.max_ur(), q.max_lr(), q.max_cb());
    Ok(())
}
