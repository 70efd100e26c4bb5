//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Golden files live in `tests/golden/`; run with `BGCOH_BLESS=1` to
//! regenerate them after an intentional format change.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use bgcoh::admissible::{
    build_admissible, convex_combine, reference_sqrt, scale, verify_admissible, AdmissibleFunction, BuilderParams,
    Floor,
};
use bgcoh::combinatorics::{denumerant_u64, index_character, IrrepLabel};
use bgcoh::model_geometry::{level_set_profile, log_grid, LevelSetProfile, WeightedAction};
use bgcoh::spectral::{
    compare_with_oracle, dense_2d_oracle, grid_doubling, kernel_dims_refined, kodaira_scan, GridParams, ModeSpec,
    OracleGrid, SpectrumResult, Thresholds,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = (bool, String);

const LAMBDAS: [u32; 3] = [1, 2, 3];
const TWISTS: [i64; 3] = [0, 1, 4];

fn action(weights: &[u32], k: i64) -> WeightedAction {
    WeightedAction::new(weights.to_vec(), k).expect("valid weights")
}

fn profile(a: &WeightedAction) -> LevelSetProfile {
    level_set_profile(a, &log_grid(0.1, 1e8, 300), 16, 1).expect("profile")
}

// ------------------------------------------------------------ criterion 1

fn histogram(weights: &[u32], t_max: usize) -> Vec<u64> {
    fn walk(weights: &[u32], used: usize, t_max: usize, hist: &mut [u64]) {
        let (&w, rest) = weights.split_first().expect("nonempty");
        let w = w as usize;
        if rest.is_empty() {
            let mut s = used;
            while s <= t_max {
                hist[s] += 1;
                s += w;
            }
            return;
        }
        let mut s = used;
        while s <= t_max {
            walk(rest, s, t_max, hist);
            s += w;
        }
    }
    let mut hist = vec![0; t_max + 1];
    walk(weights, 0, t_max, &mut hist);
    hist
}

fn all_weight_vectors(max_len: usize, max_entry: u32) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![vec![]];
    let mut all = Vec::new();
    for _ in 0..max_len {
        out = out
            .iter()
            .flat_map(|v| {
                (1..=max_entry).map(move |e| {
                    let mut w = v.clone();
                    w.push(e);
                    w
                })
            })
            .collect();
        all.extend(out.iter().cloned());
    }
    all
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let vectors = all_weight_vectors(4, 5);
    let mismatches: Vec<String> = vectors
        .par_iter()
        .filter_map(|w| {
            let hist = histogram(w, 120);
            let bad = (0..=120).find(|&t| denumerant_u64(w, t as i64).ok() != Some(hist[t]));
            bad.map(|t| format!("{w:?} at t={t}"))
        })
        .collect();
    let elapsed = started.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(10);
    (
        pass,
        format!(
            "{} weight vectors, t <= 120, {} mismatches, {:.2}s{}",
            vectors.len(),
            mismatches.len(),
            elapsed.as_secs_f64(),
            mismatches.first().map(|m| format!(", first {m}")).unwrap_or_default()
        ),
    )
}

// ------------------------------------------------------------ criterion 2

struct Sweep {
    results: BTreeMap<(u32, i64, i64), SpectrumResult>,
    failures: Vec<String>,
    elapsed: Duration,
}

fn modes() -> Vec<(u32, i64, i64)> {
    let mut out = Vec::new();
    for l in LAMBDAS {
        for k in TWISTS {
            for m in k - 3..=k + 12 {
                out.push((l, k, m));
            }
        }
    }
    out
}

fn sweep(select: impl Fn(u32, i64) -> AdmissibleFunction + Sync) -> Sweep {
    let started = Instant::now();
    let grid = GridParams::default();
    let outcomes: Vec<_> = modes()
        .into_par_iter()
        .map(|(l, k, m)| {
            let spec = ModeSpec::new(action(&[l], k), IrrepLabel(m), select(l, k), 0)
                .and_then(|spec| kernel_dims_refined(&spec, &grid, &Thresholds::default()));
            ((l, k, m), spec)
        })
        .collect();
    let mut results = BTreeMap::new();
    let mut failures = Vec::new();
    for (key, r) in outcomes {
        match r {
            Ok(r) => {
                results.insert(key, r);
            }
            Err(e) => failures.push(format!("{key:?}: {e}")),
        }
    }
    Sweep {
        results,
        failures,
        elapsed: started.elapsed(),
    }
}

fn criterion_2(s: &Sweep) -> Outcome {
    let mut wrong = Vec::new();
    let mut refined = 0;
    for (&(l, k, m), r) in &s.results {
        let expected = (denumerant_u64(&[l], m - k).expect("denumerant") as usize, 0);
        if r.kernel_dims != expected {
            wrong.push(format!("{:?} got {:?} want {expected:?}", (l, k, m), r.kernel_dims));
        }
        refined += r.grid_meta.refinement;
    }
    let pass = s.failures.is_empty() && wrong.is_empty() && s.elapsed < Duration::from_secs(300);
    let first = s.failures.iter().chain(&wrong).next().cloned().unwrap_or_default();
    (
        pass,
        format!(
            "{} modes at N=2000, {} wrong, {} errors, {} refined, {:.1}s {first}",
            s.results.len() + s.failures.len(),
            wrong.len(),
            s.failures.len(),
            refined,
            s.elapsed.as_secs_f64()
        ),
    )
}

// ------------------------------------------------------------ criterion 3

fn index_mismatches(s: &Sweep) -> Vec<String> {
    let mut bad = s.failures.clone();
    for l in LAMBDAS {
        for k in TWISTS {
            let chi = index_character(&action(&[l], k), k - 3, k + 12).expect("index");
            for m in k - 3..=k + 12 {
                let Some(r) = s.results.get(&(l, k, m)) else { continue };
                let want = chi.get(IrrepLabel(m)).expect("label in window");
                if i128::from(r.index()) != want {
                    bad.push(format!("{:?}: spectral {} vs {want}", (l, k, m), r.index()));
                }
            }
        }
    }
    bad
}

fn criterion_3(reference: &Sweep, built: &Sweep) -> Outcome {
    let a = index_mismatches(reference);
    let b = index_mismatches(built);
    let first = a.iter().chain(&b).next().cloned().unwrap_or_default();
    (
        a.is_empty() && b.is_empty(),
        format!(
            "{} modes, {} mismatches with sqrt, {} with built ({:.1}s) {first}",
            modes().len(),
            a.len(),
            b.len(),
            built.elapsed.as_secs_f64()
        ),
    )
}

// ------------------------------------------------------------ criterion 4

fn criterion_4() -> Outcome {
    let target = 1e3;
    let mut notes = Vec::new();
    let mut pass = true;
    let mut pools = Vec::new();
    for weights in [vec![1], vec![1, 1], vec![1, 2]] {
        let p = profile(&action(&weights, 0));
        let mut pool = vec![reference_sqrt()];
        for (floor, epsilon) in [(Floor::Sqrt, 1.0), (Floor::Quadratic, 1.0), (Floor::Sqrt, 0.5)] {
            let built = match build_admissible(&p, &floor, BuilderParams { epsilon, target }) {
                Ok(b) => b,
                Err(e) => {
                    pass = false;
                    notes.push(format!("{weights:?} {floor:?}: {e}"));
                    continue;
                }
            };
            let report = verify_admissible(&built.function, &p, target).expect("verify");
            if !report.pass {
                pass = false;
                notes.push(format!("{weights:?} {floor:?} eps {epsilon}: build fails verify"));
            }
            for (j, &u) in built.u_grid.iter().enumerate() {
                let jet = built.function.eval(u);
                if jet.s < built.floor[j] || jet.ds < built.floor[j] {
                    pass = false;
                    notes.push(format!("{weights:?} {floor:?}: floor violated at u={u}"));
                    break;
                }
            }
            pool.push(built.function);
        }
        pool.push(scale(&reference_sqrt(), 3.0).expect("scale"));
        pools.push((weights, p, pool));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut combos_ok = 0;
    for i in 0..50 {
        let (weights, p, pool) = &pools[i % pools.len()];
        let a = &pool[rng.random_range(0..pool.len())];
        let b = &pool[rng.random_range(0..pool.len())];
        let t: f64 = rng.random_range(0.01..0.99);
        let s = convex_combine(a, b, t, 1.0 - t).expect("combine");
        if verify_admissible(&s, p, target).expect("verify").pass {
            combos_ok += 1;
        } else {
            pass = false;
            notes.push(format!("combination {i} on {weights:?} fails"));
        }
    }
    (
        pass,
        format!(
            "builds on [1], [1,1], [1,2] with target 1e3; {combos_ok}/50 convex combinations pass {}",
            notes.first().cloned().unwrap_or_default()
        ),
    )
}

// ------------------------------------------------------------ criterion 5

fn criterion_5() -> Outcome {
    let ks: Vec<u32> = (0..=20).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in 0..=2 {
        match kodaira_scan(
            &action(&[1], 0),
            m,
            &reference_sqrt(),
            &ks,
            &GridParams::default(),
            &Thresholds::default(),
        ) {
            Ok(c) => {
                let last = c.points.last().map_or(f64::NAN, |p| p.gap);
                let ok = c.k0.is_some() && c.tail_monotone && c.dims_match && last >= 1.0;
                pass &= ok;
                parts.push(format!(
                    "m={m}: k0={} gap {:.3}..{:.3} dims {} tail {}",
                    c.k0.map_or("none".into(), |k| k.to_string()),
                    c.points[0].gap,
                    last,
                    if c.dims_match { "ok" } else { "wrong" },
                    if c.tail_monotone { "ok" } else { "drops" }
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("m={m}: {e}"));
            }
        }
    }
    (pass, parts.join("; "))
}

// ------------------------------------------------------------ criterion 6

const TRIPLES: [(u32, i64, i64); 6] = [(1, 0, 0), (1, 0, 3), (1, 1, -1), (2, 0, 4), (2, 1, -1), (3, 4, 7)];

fn criterion_6(reference: &Sweep, built: &Sweep) -> Outcome {
    let mut notes = Vec::new();
    let mut worst_oracle: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    let mut pass = true;
    let grid = GridParams::default();
    for (l, k, m) in TRIPLES {
        let spec = ModeSpec::new(action(&[l], k), IrrepLabel(m), reference_sqrt(), 0).expect("mode");
        let outcome = (|| -> bgcoh::Result<()> {
            let radial = kernel_dims_refined(&spec, &grid, &Thresholds::default())?;
            let oracle = dense_2d_oracle(&spec, &OracleGrid::default(), 3)?;
            let cmp = compare_with_oracle(&radial, &oracle, 3, 0.02);
            worst_oracle = worst_oracle.max(cmp.worst);
            if !cmp.pass {
                pass = false;
                notes.push(format!("oracle {:?}: {:?} vs {:?}", (l, k, m), cmp.radial, cmp.oracle));
            }
            let d = grid_doubling(&spec, &grid, &Thresholds::default())?;
            worst_drift = worst_drift.max(d.gap_drift);
            if !d.passed() {
                pass = false;
                notes.push(format!("doubling {:?}: drift {:.2e}", (l, k, m), d.gap_drift));
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            pass = false;
            notes.push(format!("{:?}: {e}", (l, k, m)));
        }
    }
    let mut min_cosine: f64 = 1.0;
    let mut min_eigen = f64::INFINITY;
    for r in reference.results.values().chain(built.results.values()) {
        for d in &r.degrees {
            if let Some(c) = d.kernel_cosine {
                min_cosine = min_cosine.min(c);
            }
        }
        if let Some(v) = r.min_eigenvalue() {
            min_eigen = min_eigen.min(v);
        }
    }
    if !(min_cosine > 0.999) {
        pass = false;
        notes.push(format!("kernel cosine {min_cosine}"));
    }
    if !(min_eigen >= -1e-9) {
        pass = false;
        notes.push(format!("negative eigenvalue {min_eigen:e}"));
    }
    (
        pass,
        format!(
            "oracle worst {:.3} of the 2% budget on 6 triples, doubling drift {:.2e}, min kernel cosine {:.7}, min eigenvalue {:.2e} {}",
            worst_oracle,
            worst_drift,
            min_cosine,
            min_eigen,
            notes.first().cloned().unwrap_or_default()
        ),
    )
}

// ------------------------------------------------------------ criterion 7

const GOLDEN_RUNS: [(&str, &[&str]); 5] = [
    ("betti", &["betti", "--weights", "1,2", "--twist", "0", "--m", "0..6"]),
    ("index", &["index", "--weights", "2", "--twist", "0", "--m", "0..4"]),
    (
        "verify",
        &["admissible", "verify", "--s", "ref-sqrt", "--weights", "1", "--points", "60"],
    ),
    ("spectrum", &["spectrum", "--weights", "1", "--twist", "0", "--m", "3", "--n", "400"]),
    (
        "kodaira",
        &["kodaira", "--weights", "1", "--m", "0", "--k", "0..4", "--n", "400"],
    ),
];

fn run_cli(args: &[&str], out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_bgcoh"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BGCOH_CACHE_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr)))
    }
}

/// Result files of a run; the manifest is excluded since it records wall time.
fn result_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("output dir") {
        let path = entry.expect("entry").path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name != "manifest.json" {
            out.insert(name, std::fs::read(&path).expect("read output"));
        }
    }
    out
}

fn criterion_7() -> Outcome {
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let bless = std::env::var_os("BGCOH_BLESS").is_some();
    let scratch = tempfile::tempdir().expect("tempdir");
    let mut notes = Vec::new();
    let mut compared = 0;
    for (name, args) in GOLDEN_RUNS {
        let (a, b) = (scratch.path().join(format!("{name}-a")), scratch.path().join(format!("{name}-b")));
        if let Err(e) = run_cli(args, &a).and_then(|_| run_cli(args, &b)) {
            notes.push(e);
            continue;
        }
        let (first, second) = (result_files(&a), result_files(&b));
        if first != second {
            notes.push(format!("{name}: rerun differs"));
        }
        let dir = golden.join(name);
        for (file, bytes) in &first {
            let path = dir.join(file);
            if bless {
                std::fs::create_dir_all(&dir).expect("golden dir");
                std::fs::write(&path, bytes).expect("write golden");
            }
            match std::fs::read(&path) {
                Ok(expected) if &expected == bytes => compared += 1,
                Ok(_) => notes.push(format!("{name}/{file} differs from golden")),
                Err(_) => notes.push(format!("{name}/{file} has no golden file")),
            }
        }
        let verified = Command::new(env!("CARGO_BIN_EXE_bgcoh"))
            .arg("verify-manifest")
            .arg(&a)
            .stdout(std::process::Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false);
        if !verified {
            notes.push(format!("{name}: manifest does not verify"));
        }
    }
    (
        notes.is_empty(),
        format!(
            "{compared} files match golden, reruns byte-identical: {} {}",
            !notes.iter().any(|n| n.contains("rerun")),
            notes.first().cloned().unwrap_or_default()
        ),
    )
}

fn main() {
    let mut lines = Vec::new();
    let mut report = |n: u32, (pass, detail): Outcome| {
        let line = format!("criterion {n} {}: {}", if pass { "PASS" } else { "FAIL" }, detail.trim_end());
        println!("{line}");
        lines.push(pass);
    };
    report(1, criterion_1());

    let reference = sweep(|_, _| reference_sqrt());
    report(2, criterion_2(&reference));

    let built: BTreeMap<(u32, i64), AdmissibleFunction> = LAMBDAS
        .iter()
        .flat_map(|&l| TWISTS.iter().map(move |&k| (l, k)))
        .map(|(l, k)| {
            let b = build_admissible(&profile(&action(&[l], k)), &Floor::Sqrt, BuilderParams::default())
                .expect("builder");
            ((l, k), b.function)
        })
        .collect();
    let built_sweep = sweep(|l, k| built[&(l, k)].clone());
    report(3, criterion_3(&reference, &built_sweep));

    report(4, criterion_4());
    report(5, criterion_5());
    report(6, criterion_6(&reference, &built_sweep));
    report(7, criterion_7());

    if lines.iter().any(|p| !p) {
        std::process::exit(1);
    }
}
