use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use symsub::congruence::{ballantine_reduce, matrix_symsubrank, sym_diagonalize};
use symsub::hypergraph::{
    alpha_chain_check, capacity_lower, capacity_upper_quantum, independence_number, induced_matching_number,
    strong_power, Hypergraph,
};
use symsub::json::scalar_to_json;
use symsub::quantum::{
    marginal_equality_check, sandwich_check, sym_quantum_functional, uniform_quantum_functional, CTensor,
    QuantumEstimate, QuantumOptions,
};
use symsub::restrict::{
    matrix_subrank_certificate, subrank_exact, symsubrank_exact, symrank_small, verify_certificate, SymRank,
    DEFAULT_BUDGET,
};
use symsub::symlift::{
    create_t, fully_symmetric, reconstruct, symmetrize_certificate, symrank_upper, verify_factorized, waring_h,
    Factorization, WaringTerm,
};
use symsub::{Certificate, Error, ScalarDomain, SearchOptions, Tensor};

/// Largest source power materialized by `verify` before it switches to the
/// factorized check.
const MATERIALIZE_CAP: u128 = 1 << 24;

#[derive(Parser, Debug)]
#[command(name = "symsub", version, about = "Subrank, symmetric subrank and related tensor parameters")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Tensor JSON file.
    #[arg(long, global = true)]
    tensor: Option<PathBuf>,
    /// Hypergraph JSON file.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// F<p> or C; must agree with the tensor file when both are given.
    #[arg(long, global = true)]
    domain: Option<String>,
    /// Candidate budget for exhaustive searches.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Print a JSON report instead of a table.
    #[arg(long, global = true)]
    json: bool,
    /// Random restarts for the entropy optimizer.
    #[arg(long, global = true, default_value_t = 8)]
    restarts: usize,
    /// Certificate JSON file to read.
    #[arg(long, global = true)]
    certificate: Option<PathBuf>,
    /// Write produced certificates here and reference them by path.
    #[arg(long, global = true)]
    cert_out: Option<PathBuf>,
    /// Print wall-clock time (table output only).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Flattening ranks, and the matrix rank for order 2.
    Rank,
    Subrank,
    Symsubrank,
    /// Exact symmetric rank by exhaustive search.
    Symrank,
    /// Triangular congruence form B f Bᵀ.
    Congruence,
    /// Diagonal congruence form of a symmetric matrix.
    Diagonalize,
    /// Waring decomposition of the fully symmetric tensor, or an upper bound
    /// on the symmetric rank of --tensor from a --certificate witness.
    Waring {
        #[arg(long)]
        order: Option<usize>,
    },
    Createt,
    /// Turns a restriction certificate for --tensor into a symmetric one.
    Symmetrize,
    Verify,
    #[command(subcommand)]
    Hypergraph(GraphCommand),
    #[command(subcommand)]
    Quantum(QuantumCommand),
}

#[derive(Subcommand, Debug)]
enum GraphCommand {
    /// Independence number; with --power, also the capacity lower bound.
    Alpha {
        #[arg(long)]
        power: Option<usize>,
    },
    /// Induced matching number.
    Beta,
    /// Strong power.
    Power {
        #[arg(long)]
        power: usize,
    },
    /// α ≤ symQ ≤ Q and α ≤ β ≤ Q on the adjacency tensor.
    Chain,
}

#[derive(Subcommand, Debug)]
enum QuantumCommand {
    /// Symmetric functional of --tensor, or the capacity estimate of --graph.
    #[command(name = "F")]
    F,
    #[command(name = "Funiform")]
    Funiform,
    /// Marginal entropy inequalities at the input.
    Check,
}

struct CliError {
    code: String,
    message: String,
    exit: u8,
}

impl CliError {
    fn new(code: &str, message: impl Into<String>) -> Self {
        CliError { code: code.into(), message: message.into(), exit: 1 }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: e.code().into(), message: e.to_string(), exit: if e.is_resource_limit() { 2 } else { 1 } }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

struct Ctx {
    g: Global,
    inputs: Map<String, Value>,
}

/// Result of one subcommand before it is wrapped into a report.
struct Outcome {
    outputs: Value,
    verification: &'static str,
}

fn read_json(path: &Path) -> CliResult<(Value, String)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let v = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::new("malformed-json", format!("{}: {e}", path.display())))?;
    Ok((v, digest))
}

impl Ctx {
    fn record(&mut self, role: &str, path: &Path, digest: String) {
        self.inputs.insert(role.into(), json!({ "path": path.display().to_string(), "sha256": digest }));
    }

    fn opts(&self) -> SearchOptions {
        SearchOptions { budget: self.g.budget, workers: self.g.workers.max(1) }
    }

    fn quantum_opts(&self) -> QuantumOptions {
        QuantumOptions { restarts: self.g.restarts, seed: self.g.seed, ..Default::default() }
    }

    fn domain_flag(&self) -> CliResult<Option<ScalarDomain>> {
        self.g.domain.as_deref().map(|s| s.parse().map_err(CliError::from)).transpose()
    }

    fn tensor(&mut self) -> CliResult<Tensor> {
        let path = self.g.tensor.clone().ok_or_else(|| CliError::new("usage", "--tensor is required"))?;
        let (v, digest) = read_json(&path)?;
        let t = Tensor::from_json(&v)?;
        if let Some(d) = self.domain_flag()? {
            d.ensure_same(&t.domain())?;
        }
        self.record("tensor", &path, digest);
        Ok(t)
    }

    fn graph(&mut self) -> CliResult<Hypergraph> {
        let path = self.g.graph.clone().ok_or_else(|| CliError::new("usage", "--graph is required"))?;
        let (v, digest) = read_json(&path)?;
        let h = Hypergraph::from_json(&v)?;
        self.record("graph", &path, digest);
        Ok(h)
    }

    fn certificate_json(&mut self) -> CliResult<Value> {
        let path = self.g.certificate.clone().ok_or_else(|| CliError::new("usage", "--certificate is required"))?;
        let (v, digest) = read_json(&path)?;
        self.record("certificate", &path, digest);
        Ok(v)
    }

    /// Writes the certificate to `--cert-out` and returns a reference, or
    /// returns it inline.
    fn emit_certificate(&self, cert: Value) -> CliResult<Value> {
        match &self.g.cert_out {
            Some(path) => {
                let text = serde_json::to_string_pretty(&cert).expect("JSON value serializes");
                std::fs::write(path, text + "\n")
                    .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
                Ok(json!({ "path": path.display().to_string() }))
            }
            None => Ok(cert),
        }
    }
}

fn status(ok: bool) -> &'static str {
    if ok {
        "verified"
    } else {
        "not-verified"
    }
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|x| x + 1).collect()
}

fn terms_json(terms: &[WaringTerm]) -> Value {
    terms
        .iter()
        .map(|t| json!({ "coef": scalar_to_json(t.coef), "vector": t.vector.iter().map(|&x| scalar_to_json(x)).collect::<Vec<_>>() }))
        .collect()
}

fn estimate_json(e: &QuantumEstimate) -> Value {
    json!({
        "value": e.f_lower,
        "entropy": e.entropy,
        "point": e.point,
        "restarts": e.restarts,
        "iterations": e.iterations,
        "gradientNorm": e.gradient_norm,
        "start": e.start,
        "label": e.label,
    })
}

fn rank(ctx: &mut Ctx) -> CliResult<Outcome> {
    let f = ctx.tensor()?;
    let legs: Vec<usize> =
        (0..f.order()).map(|j| f.flattening_rank(&[j])).collect::<symsub::Result<_>>()?;
    let mut out = json!({ "flatteningRanks": legs, "maxFlatteningRank": f.max_flattening_rank() });
    if f.order() == 2 {
        out["matrixRank"] = json!(f.matrix_rank()?);
    }
    Ok(Outcome { outputs: out, verification: "exact" })
}

fn subrank(ctx: &mut Ctx) -> CliResult<Outcome> {
    let f = ctx.tensor()?;
    let rc = if f.order() == 2 { matrix_subrank_certificate(&f)? } else { subrank_exact(&f, &ctx.opts())? };
    let ok = verify_certificate(&rc.certificate, &f)?;
    let out = json!({
        "value": rc.value,
        "examined": rc.examined,
        "certificate": ctx.emit_certificate(rc.certificate.to_json())?,
    });
    Ok(Outcome { outputs: out, verification: status(ok) })
}

fn symsubrank(ctx: &mut Ctx) -> CliResult<Outcome> {
    let f = ctx.tensor()?;
    if f.order() == 2 {
        let m = matrix_symsubrank(&f, &ctx.opts(), ctx.g.seed)?;
        let ok = verify_certificate(&m.certificate, &f)?;
        let out = json!({
            "value": m.exact(),
            "lower": m.lower,
            "upper": m.upper,
            "method": m.method,
            "certificate": ctx.emit_certificate(m.certificate.to_json())?,
        });
        return Ok(Outcome { outputs: out, verification: status(ok) });
    }
    let rc = symsubrank_exact(&f, &ctx.opts())?;
    let ok = verify_certificate(&rc.certificate, &f)?;
    let out = json!({
        "value": rc.value,
        "examined": rc.examined,
        "certificate": ctx.emit_certificate(rc.certificate.to_json())?,
    });
    Ok(Outcome { outputs: out, verification: status(ok) })
}

fn symrank(ctx: &mut Ctx) -> CliResult<Outcome> {
    let f = ctx.tensor()?;
    Ok(match symrank_small(&f, &ctx.opts())? {
        SymRank::Exact { rank, vectors } => {
            let terms: Vec<WaringTerm> =
                vectors.into_iter().map(|v| WaringTerm { coef: f.domain().one(), vector: v }).collect();
            let ok = reconstruct(&terms, f.order(), f.domain())?.approx_eq(&f);
            let out = json!({ "value": rank, "status": "exact", "terms": terms_json(&terms) });
            Outcome { outputs: out, verification: status(ok) }
        }
        SymRank::Unknown { lower, examined } => Outcome {
            outputs: json!({ "value": null, "status": "unknown", "lower": lower, "examined": examined }),
            verification: "bound",
        },
    })
}

fn congruence(ctx: &mut Ctx) -> CliResult<Outcome> {
    let f = ctx.tensor()?;
    let r = ballantine_reduce(&f, ctx.g.seed)?;
    let ok = f.apply(&[r.b.clone(), r.b.clone()])?.approx_eq(&r.l);
    Ok(Outcome { outputs: r.to_json(), verification: status(ok) })
}

fn diagonalize(ctx: &mut Ctx) -> CliResult<Outcome> {
    let f = ctx.tensor()?;
    let (b, d) = sym_diagonalize(&f, ctx.g.seed)?;
    let ok = f.apply_sym(&b)?.approx_eq(&d);
    let nonzeros = (0..d.dims()[0]).filter(|&i| !f.domain().is_zero(d.get(&[i, i]))).count();
    let out = json!({ "B": b.to_json(), "D": d.to_matrix()?.to_json(), "rank": nonzeros });
    Ok(Outcome { outputs: out, verification: status(ok) })
}

fn waring(ctx: &mut Ctx, order: Option<usize>) -> CliResult<Outcome> {
    if let Some(k) = order {
        let domain = ctx.domain_flag()?.ok_or_else(|| CliError::new("usage", "--order needs --domain"))?;
        let terms = waring_h(k, domain)?;
        let ok = reconstruct(&terms, k, domain)?.approx_eq(&fully_symmetric(k, domain));
        let out = json!({ "order": k, "termCount": terms.len(), "terms": terms_json(&terms) });
        return Ok(Outcome { outputs: out, verification: status(ok) });
    }
    let f = ctx.tensor()?;
    let witness = Certificate::from_json(&ctx.certificate_json()?)?;
    let up = symrank_upper(&f, &witness)?;
    let ok = reconstruct(&up.terms, f.order(), f.domain())?.approx_eq(&f);
    let out = json!({ "bound": up.bound, "fromWitness": up.from_witness, "terms": terms_json(&up.terms) });
    Ok(Outcome { outputs: out, verification: status(ok) })
}

fn createt(ctx: &mut Ctx) -> CliResult<Outcome> {
    let f = ctx.tensor()?;
    let ct = create_t(&f)?;
    let ok = ct.sound && ct.materialized != Some(false);
    let out = json!({ "c": ct.c, "type": one_based(&ct.y), "certificate": ctx.emit_certificate(ct.to_json())? });
    Ok(Outcome { outputs: out, verification: status(ok) })
}

fn symmetrize(ctx: &mut Ctx) -> CliResult<Outcome> {
    let f = ctx.tensor()?;
    let rc = Certificate::from_json(&ctx.certificate_json()?)?;
    let sc = symmetrize_certificate(&f, &rc)?;
    let out = json!({
        "value": sc.certificate.target.dims()[0],
        "sourcePower": sc.certificate.source_power,
        "verifiedBy": sc.verified_by,
        "certificate": ctx.emit_certificate(sc.to_json())?,
    });
    Ok(Outcome { outputs: out, verification: status(sc.certificate.verified) })
}

fn verify(ctx: &mut Ctx) -> CliResult<Outcome> {
    let f = ctx.tensor()?;
    let v = ctx.certificate_json()?;
    let cert = Certificate::from_json(&v)?;
    let entries = (f.len() as u128).checked_pow(cert.source_power as u32).unwrap_or(u128::MAX);
    let (ok, method) = match v.get("factorization") {
        Some(fz) if entries > MATERIALIZE_CAP => {
            (verify_factorized(&cert, &Factorization::from_json(fz, f.domain())?, &f)?, "factorized")
        }
        _ => (verify_certificate(&cert, &f)?, "materialized"),
    };
    if !ok {
        return Err(CliError::new("not-verified", "certificate maps do not reproduce the target"));
    }
    let out = json!({ "status": "verified", "method": method, "sourcePower": cert.source_power });
    Ok(Outcome { outputs: out, verification: "verified" })
}

fn graph_command(ctx: &mut Ctx, cmd: &GraphCommand) -> CliResult<Outcome> {
    let h = ctx.graph()?;
    match cmd {
        GraphCommand::Alpha { power } => {
            let (alpha, set) = independence_number(&h)?;
            let mut out = json!({ "alpha": alpha, "independentSet": one_based(&set) });
            if let Some(m) = *power {
                let cl = capacity_lower(&h, m)?;
                out["capacityLower"] = json!({
                    "power": cl.m,
                    "alpha": cl.alpha,
                    "value": cl.value,
                    "best": { "alpha": cl.best.0, "power": cl.best.1, "value": cl.best.2 },
                });
            }
            Ok(Outcome { outputs: out, verification: "exact" })
        }
        GraphCommand::Beta => {
            let m = induced_matching_number(&h)?;
            let matching: Vec<Vec<usize>> = m.matching.iter().map(|e| one_based(e)).collect();
            let out = json!({ "beta": m.value, "matching": matching, "method": m.method });
            Ok(Outcome { outputs: out, verification: "exact" })
        }
        GraphCommand::Power { power } => {
            let p = strong_power(&h, *power)?;
            let out = json!({ "n": p.n(), "k": p.k(), "edgeCount": p.edges().len(), "graph": p.to_json() });
            Ok(Outcome { outputs: out, verification: "exact" })
        }
        GraphCommand::Chain => {
            let domain = ctx.domain_flag()?.ok_or_else(|| CliError::new("usage", "chain needs --domain"))?;
            let r = alpha_chain_check(&h, domain, &ctx.opts())?;
            let out = json!({
                "alpha": r.alpha,
                "independentSet": one_based(&r.alpha_witness),
                "symsubrank": r.symsubrank,
                "beta": r.beta,
                "matching": r.beta_witness.iter().map(|e| one_based(e)).collect::<Vec<_>>(),
                "subrank": r.subrank,
                "chainHolds": r.holds(),
                "separation": r.separation,
            });
            Ok(Outcome { outputs: out, verification: status(r.holds()) })
        }
    }
}

fn quantum_command(ctx: &mut Ctx, cmd: &QuantumCommand) -> CliResult<Outcome> {
    let opts = ctx.quantum_opts();
    match cmd {
        QuantumCommand::F if ctx.g.tensor.is_none() && ctx.g.graph.is_some() => {
            let h = ctx.graph()?;
            let e = capacity_upper_quantum(&h, &opts)?;
            Ok(Outcome { outputs: estimate_json(&e), verification: "estimate" })
        }
        QuantumCommand::F => {
            let e = sym_quantum_functional(&ctx.tensor()?, &opts)?;
            Ok(Outcome { outputs: estimate_json(&e), verification: "estimate" })
        }
        QuantumCommand::Funiform => {
            let e = uniform_quantum_functional(&ctx.tensor()?, &opts)?;
            Ok(Outcome { outputs: estimate_json(&e), verification: "estimate" })
        }
        QuantumCommand::Check => {
            let f = ctx.tensor()?;
            let s = sandwich_check(&CTensor::from_tensor(&f)?)?;
            let mut out = json!({ "sandwich": s });
            if f.is_cubical() && f.is_symmetric()? {
                out["marginalSpread"] = json!(marginal_equality_check(&f)?);
            }
            Ok(Outcome { outputs: out, verification: "verified" })
        }
    }
}

fn dispatch(ctx: &mut Ctx, cmd: &Command) -> CliResult<Outcome> {
    match cmd {
        Command::Rank => rank(ctx),
        Command::Subrank => subrank(ctx),
        Command::Symsubrank => symsubrank(ctx),
        Command::Symrank => symrank(ctx),
        Command::Congruence => congruence(ctx),
        Command::Diagonalize => diagonalize(ctx),
        Command::Waring { order } => waring(ctx, *order),
        Command::Createt => createt(ctx),
        Command::Symmetrize => symmetrize(ctx),
        Command::Verify => verify(ctx),
        Command::Hypergraph(g) => graph_command(ctx, g),
        Command::Quantum(q) => quantum_command(ctx, q),
    }
}

fn command_name(cmd: &Command) -> String {
    match cmd {
        Command::Rank => "rank".into(),
        Command::Subrank => "subrank".into(),
        Command::Symsubrank => "symsubrank".into(),
        Command::Symrank => "symrank".into(),
        Command::Congruence => "congruence".into(),
        Command::Diagonalize => "diagonalize".into(),
        Command::Waring { .. } => "waring".into(),
        Command::Createt => "createt".into(),
        Command::Symmetrize => "symmetrize".into(),
        Command::Verify => "verify".into(),
        Command::Hypergraph(g) => format!(
            "hypergraph {}",
            match g {
                GraphCommand::Alpha { .. } => "alpha",
                GraphCommand::Beta => "beta",
                GraphCommand::Power { .. } => "power",
                GraphCommand::Chain => "chain",
            }
        ),
        Command::Quantum(q) => format!(
            "quantum {}",
            match q {
                QuantumCommand::F => "F",
                QuantumCommand::Funiform => "Funiform",
                QuantumCommand::Check => "check",
            }
        ),
    }
}

fn table(report: &Value, elapsed: Option<f64>) -> String {
    let mut lines = Vec::new();
    for key in ["command", "inputs", "seed", "budget"] {
        lines.push(format!("{key}: {}", scalar_text(&report[key])));
    }
    if let Value::Object(m) = &report["outputs"] {
        for (k, x) in m {
            lines.push(format!("{k}: {}", scalar_text(x)));
        }
    }
    lines.push(format!("verification: {}", scalar_text(&report["verification"])));
    if let Some(s) = elapsed {
        lines.push(format!("seconds: {s:.3}"));
    }
    lines.join("\n") + "\n"
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.global.workers > 1 {
        // A second initialization only fails if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.global.workers).build_global();
    }
    let start = Instant::now();
    let mut ctx = Ctx { g: cli.global, inputs: Map::new() };
    let outcome = dispatch(&mut ctx, &cli.command)?;
    let report = json!({
        "command": command_name(&cli.command),
        "inputs": Value::Object(ctx.inputs),
        "seed": ctx.g.seed,
        "budget": ctx.g.budget,
        "outputs": outcome.outputs,
        "verification": outcome.verification,
    });
    let text = if ctx.g.json {
        serde_json::to_string_pretty(&report).expect("JSON value serializes") + "\n"
    } else {
        table(&report, ctx.g.timing.then(|| start.elapsed().as_secs_f64()))
    };
    // a closed pipe downstream is not an error of ours
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    Ok(())
}

fn fail(e: CliError) -> ExitCode {
    let message = e.message.replace('\n', " ");
    eprintln!("error: code={} message={}", e.code, message.trim());
    ExitCode::from(e.exit)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            return fail(CliError::new("usage", first));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
