use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cubical_forms::combinatorics::{combinations, small_cube_count};
use cubical_forms::convergence::{catalog_form, eoc_gate, rows_to_csv, run_convergence, ConvergenceConfig};
use cubical_forms::dof::{assemble_dof_matrix, check_unisolvence};
use cubical_forms::interp::{de_rham, default_quad_order, interpolate, Cochain};
use cubical_forms::mesh::{load_mesh, RefinedMesh};
use cubical_forms::smallcubes::enumerate_small_cubes;
use cubical_forms::Error;

const MAX_N: usize = 6;
const MAX_K: usize = 8;
/// Largest dense DOF matrix the CLI will assemble.
const MAX_DOFS: usize = 6000;

#[derive(Parser)]
#[command(name = "cubical-forms", version, about = "Higher-order cubical forms: bases, DOFs, interpolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dimension of the order-k form spaces for every degree p.
    Dims {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        out: Out,
    },
    /// Assemble the reference DOF matrix and report invertibility.
    CheckUnisolvence {
        #[command(flatten)]
        space: Space,
        #[command(flatten)]
        out: Out,
    },
    /// Reference DOF matrix as `row,col,value` CSV (nonzero entries).
    DofMatrix {
        #[command(flatten)]
        space: Space,
        #[command(flatten)]
        out: Out,
    },
    /// Refined-mesh dump: global small cubes with owners and anchors.
    Refine {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        out: Out,
    },
    /// Integrate a catalog form over the small p-cubes of a refined mesh.
    DeRham {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "sinprod")]
        form: String,
        #[arg(long)]
        quad_order: Option<usize>,
        #[command(flatten)]
        out: Out,
    },
    /// Interpolate a cochain and evaluate it at the given points.
    Interpolate {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        cochain: PathBuf,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        k: usize,
        /// One point per line, comma separated.
        #[arg(long)]
        points: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Sup error of W C_k ω on refined structured meshes, with observed orders.
    Convergence {
        #[command(flatten)]
        space: Space,
        #[arg(long, default_value = "sinprod")]
        form: String,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        m_list: Vec<usize>,
        #[arg(long, default_value_t = 0.0)]
        shear: f64,
        /// Sample points per axis and cell.
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long)]
        quad_order: Option<usize>,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Args, Clone, Copy)]
struct Space {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    k: usize,
}

#[derive(Args)]
struct Out {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Input errors exit with 2; failed checks are reported through the
/// `passed` flag of a successful run and exit with 1.
enum Failure {
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(String, bool), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (out, result) = run(cli.command);
    match result {
        Ok((text, passed)) => {
            if let Err(e) = emit(out.as_deref(), &text) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(command: Command) -> (Option<PathBuf>, Outcome) {
    match command {
        Command::Dims { n, k, out } => (out.out, cmd_dims(n, k)),
        Command::CheckUnisolvence { space, out } => (out.out, cmd_check_unisolvence(space)),
        Command::DofMatrix { space, out } => (out.out, cmd_dof_matrix(space)),
        Command::Refine { mesh, k, out } => (out.out, cmd_refine(&mesh, k)),
        Command::DeRham { mesh, p, k, form, quad_order, out } => (out.out, cmd_de_rham(&mesh, p, k, &form, quad_order)),
        Command::Interpolate { mesh, cochain, p, k, points, out } => {
            (out.out, cmd_interpolate(&mesh, &cochain, p, k, &points))
        }
        Command::Convergence { space, form, m_list, shear, samples, quad_order, out } => {
            let config = ConvergenceConfig { shear, samples_per_axis: samples, quad_order, ..Default::default() };
            (out.out, cmd_convergence(space, &form, &m_list, config))
        }
    }
}

fn check_limits(n: usize, k: usize) -> Result<(), Failure> {
    if n == 0 || n > MAX_N {
        return Err(Failure::Input(format!("n must be in 1..={MAX_N}, got {n}")));
    }
    if k == 0 || k > MAX_K {
        return Err(Failure::Input(format!("k must be in 1..={MAX_K}, got {k}")));
    }
    Ok(())
}

fn check_space(s: Space) -> Result<(), Failure> {
    check_limits(s.n, s.k)?;
    if s.p > s.n {
        return Err(Failure::Input(format!("p must be at most n = {}, got {}", s.n, s.p)));
    }
    Ok(())
}

fn check_matrix_size(s: Space) -> Result<(), Failure> {
    let size = small_cube_count(s.n, s.p, s.k);
    if size > MAX_DOFS {
        return Err(Failure::Input(format!("DOF matrix would be {size}×{size}; limit is {MAX_DOFS}")));
    }
    Ok(())
}

fn cmd_dims(n: usize, k: usize) -> Outcome {
    check_limits(n, k)?;
    let verify = n <= 4 && k <= 4;
    let mut text = String::from("p,dimension,enumerated\n");
    let mut passed = true;
    for p in 0..=n {
        let dim = small_cube_count(n, p, k);
        let enumerated = if verify {
            let count = enumerate_small_cubes(n, p, k)?.len();
            passed &= count == dim;
            count.to_string()
        } else {
            String::new()
        };
        let _ = writeln!(text, "{p},{dim},{enumerated}");
    }
    Ok((text, passed))
}

fn cmd_check_unisolvence(s: Space) -> Outcome {
    check_space(s)?;
    check_matrix_size(s)?;
    let r = check_unisolvence(s.n, s.p, s.k)?;
    let mut text = String::new();
    let _ = writeln!(text, "n={} p={} k={} size={}", r.n, r.p, r.k, r.size);
    let _ = writeln!(text, "block_diagonal={}", r.block_diagonal);
    let _ = writeln!(text, "invertible={}", r.invertible);
    let _ = writeln!(text, "condition_estimate={:.6e}", r.condition_estimate);
    for b in &r.blocks {
        let _ = writeln!(
            text,
            "block {:?}: rank={} sigma_max={:.6e} sigma_min={:.6e} condition={:.6e}",
            b.directions,
            b.spectrum.rank,
            b.spectrum.sigma_max,
            b.spectrum.sigma_min,
            b.spectrum.condition()
        );
    }
    let passed = r.invertible && r.block_diagonal;
    let _ = writeln!(text, "{}", if passed { "PASS" } else { "FAIL" });
    Ok((text, passed))
}

fn cmd_dof_matrix(s: Space) -> Outcome {
    check_space(s)?;
    check_matrix_size(s)?;
    Ok((assemble_dof_matrix(s.n, s.p, s.k)?.to_csv(), true))
}

fn refined_mesh(path: &Path, k: usize) -> Result<RefinedMesh, Failure> {
    let mesh = load_mesh(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    check_limits(mesh.dim(), k)?;
    Ok(RefinedMesh::new(mesh, k)?)
}

fn cmd_refine(mesh: &Path, k: usize) -> Outcome {
    Ok((refined_mesh(mesh, k)?.to_csv(), true))
}

fn cmd_de_rham(mesh: &Path, p: usize, k: usize, form: &str, quad_order: Option<usize>) -> Outcome {
    let refined = refined_mesh(mesh, k)?;
    let form = catalog_form(form, refined.dim(), p, k)?;
    let cochain = de_rham(&form, &refined, quad_order.unwrap_or_else(|| default_quad_order(k)))?;
    Ok((cochain.to_csv(), true))
}

fn read_points(path: &Path, n: usize) -> Result<Vec<Vec<f64>>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = |msg: String| Failure::Input(format!("{}:{}: {msg}", path.display(), i + 1));
        let pt = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| at(format!("bad coordinate `{}`: {e}", f.trim()))))
            .collect::<Result<Vec<f64>, Failure>>()?;
        if pt.len() != n {
            return Err(at(format!("expected {n} coordinates, got {}", pt.len())));
        }
        points.push(pt);
    }
    Ok(points)
}

fn cmd_interpolate(mesh: &Path, cochain: &Path, p: usize, k: usize, points: &Path) -> Outcome {
    let refined = refined_mesh(mesh, k)?;
    let n = refined.dim();
    if p > n {
        return Err(Failure::Input(format!("p must be at most n = {n}, got {p}")));
    }
    let text = std::fs::read_to_string(cochain).map_err(|e| Failure::Input(format!("{}: {e}", cochain.display())))?;
    let x = Cochain::from_csv(&refined, p, &text).map_err(|e| Failure::Input(format!("{}: {e}", cochain.display())))?;
    let w = interpolate(&x, &refined)?;
    let points = read_points(points, n)?;

    let mut out = String::from("point");
    for dirs in combinations(n, p) {
        let name: String = dirs.iter().map(|d| d.to_string()).collect();
        let _ = write!(out, ",w{}", if name.is_empty() { "0".into() } else { format!("_{name}") });
    }
    out.push('\n');
    for (i, y) in points.iter().enumerate() {
        let comps = w.evaluate(y)?;
        let _ = write!(out, "{i}");
        for c in comps {
            let _ = write!(out, ",{c:.12e}");
        }
        out.push('\n');
    }
    Ok((out, true))
}

fn cmd_convergence(s: Space, form: &str, m_list: &[usize], config: ConvergenceConfig) -> Outcome {
    check_space(s)?;
    let form = catalog_form(form, s.n, s.p, s.k)?;
    if m_list.len() < 2 {
        return Err(Failure::Input("need at least two mesh sizes to estimate an order".into()));
    }
    let rows = run_convergence(&form, s.k, m_list, &config)?;
    let passed = eoc_gate(&rows, s.k);
    if !passed {
        let last = rows.last().and_then(|r| r.eoc).unwrap_or(f64::NAN);
        eprintln!("observed order {last:.4} outside [{:.1}, {:.1}]", s.k as f64 - 0.3, s.k as f64 + 0.5);
    }
    Ok((rows_to_csv(&rows), passed))
}
