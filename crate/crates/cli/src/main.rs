use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use tlf::bt_ops::{certify, decompose_identity, finite_potent_trace, lifting_system_from_json, Target};
use tlf::forms::separate;
use tlf::geom::global_residue_sum;
use tlf::residue::{counterexample_char0, res_tlf, res_tlf_detailed, tate_residue_dim1, trace_forms, ExtensionSpec};
use tlf::scalars::{BaseKind, ExtField};
use tlf::selftest;
use tlf::series::DEFAULT_WINDOW;
use tlf::syntax::{format_operator, parse_form, parse_operator, parse_rational_form, parse_series};
use tlf::tlf::{change_of_lifting_matrix, monomial_basis, ArtinianQuotient, LiftingSpec, LiftingSystem, TlfDescriptor};
use tlf::{Error, Result};

#[derive(Parser)]
#[command(name = "tlfres", version, about = "Exact residues and operators on iterated Laurent series fields")]
struct Cli {
    #[command(flatten)]
    field: FieldArgs,

    /// Compact JSON output (the default).
    #[arg(long, global = true, conflicts_with = "pretty")]
    json: bool,

    /// Indented JSON output.
    #[arg(long, global = true)]
    pretty: bool,

    /// Seed for randomized probes and suites.
    #[arg(long, global = true, default_value_t = 20240)]
    seed: u64,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct FieldArgs {
    /// Characteristic of the base field: 0 for Q, or a prime.
    #[arg(long = "char", global = true, default_value_t = 0)]
    characteristic: u32,

    /// Minimal polynomial of the constant field over the base, in x (e.g. "x^2 + 1").
    #[arg(long, global = true)]
    ext_poly: Option<String>,

    /// Dimension n; inferred from the highest generator index when omitted.
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Precision window per level.
    #[arg(long, global = true)]
    window: Option<i64>,
}

#[derive(Subcommand)]
enum Command {
    /// Residue of a top-degree form.
    Residue { form: String },
    /// Commutator-trace residue of f dg at n = 1.
    TateResidue { f: String, g: String },
    /// Trace of a form from a finite extension down to the base field.
    TraceForm {
        form: String,
        /// Kummer extension of ramification index E (t1 = s^E).
        #[arg(long, conflicts_with = "upper_poly")]
        kummer: Option<u32>,
        /// Unramified extension with constant field cut out by this polynomial in x.
        #[arg(long)]
        upper_poly: Option<String>,
    },
    /// Residues of the two-variable example under the standard and twisted topologies.
    Counterexample {
        /// Series in t2 substituted for b.
        #[arg(long)]
        b: Option<String>,
    },
    /// Certificate that an operator lies in E or in an ideal (i,j).
    Certify {
        op: String,
        /// E, or (i,j) with j in {1,2}.
        #[arg(long, default_value = "E")]
        target: String,
    },
    /// Splits the identity at a level into two certified pieces.
    Decompose {
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// Lifting system as a JSON array of per-level liftings.
        #[arg(long)]
        sigma: Option<String>,
    },
    /// Trace of a finite-potent operator.
    TraceOp { op: String },
    /// Local residues of p(t)/q(t) dt at every closed point and their sum.
    GlobalSum {
        #[arg(required_unless_present = "form", conflicts_with = "form")]
        text: Option<String>,
        #[arg(long)]
        form: Option<String>,
    },
    /// Change-of-lifting matrix between the standard and a twisted lifting.
    LiftMatrix {
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// Truncation exponent l of the quotient O_i / m_i^(l+1).
        #[arg(long, default_value_t = 2)]
        l: u32,
        /// Generator index of the twisting derivation.
        #[arg(long)]
        axis: Option<usize>,
        /// Coefficient of the twisting derivation, a series in the remaining generators.
        #[arg(long, default_value = "1")]
        c: String,
        /// Truncation depth of the twisted lifting; defaults to l.
        #[arg(long)]
        depth: Option<u32>,
    },
    /// Runs the acceptance suite.
    Selftest {
        /// Run a single criterion.
        #[arg(long)]
        only: Option<u8>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match run(&cli) {
        Ok(v) => v,
        Err(e) => {
            let v = json!({ "error": { "code": e.code(), "message": e.to_string() } });
            println!("{}", render(&v, cli.pretty));
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    println!("{}", render(&out.value, cli.pretty));
    if out.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

struct Output {
    value: Value,
    ok: bool,
}

impl From<Value> for Output {
    fn from(value: Value) -> Self {
        Output { value, ok: true }
    }
}

fn render(v: &Value, pretty: bool) -> String {
    if pretty {
        serde_json::to_string_pretty(v).expect("values serialize")
    } else {
        v.to_string()
    }
}

fn run(cli: &Cli) -> Result<Output> {
    let fa = &cli.field;
    match &cli.cmd {
        Command::Residue { form } => {
            let k = descriptor(fa, &[form])?;
            let p = parse_form(&k.field, form)?;
            let w = separate(&p.form, &p.context(&k)?)?;
            Ok(res_tlf_detailed(&w)?.to_json().into())
        }
        Command::TateResidue { f, g } => {
            let k = descriptor(fa, &[f, g])?;
            if k.n != 1 {
                return Err(Error::Domain("the commutator residue is defined at n = 1".into()));
            }
            let v = tate_residue_dim1(&parse_series(&k, f)?, &parse_series(&k, g)?)?;
            Ok(json!({ "value": v.to_canonical_string(), "window_used": null }).into())
        }
        Command::TraceForm { form, kummer, upper_poly } => {
            let base = descriptor(fa, &[form])?;
            let spec = match (kummer, upper_poly) {
                (Some(e), None) => ExtensionSpec::kummer(base.clone(), *e)?,
                (None, Some(p)) => {
                    let upper = ext_field(base.field.base(), p)?;
                    ExtensionSpec::unramified(base.clone(), upper)?
                }
                _ => return Err(Error::Domain("give exactly one of --kummer or --upper-poly".into())),
            };
            let up = spec.upper();
            let p = parse_form(&up.field, form)?;
            let w = separate(&p.form, &p.context(&up)?)?;
            let tr = trace_forms(&w, &spec)?;
            let mut out = json!({ "trace": tr.to_json() });
            if w.deg() == up.n {
                out["value_upper"] = json!(res_tlf(&w)?.to_canonical_string());
                out["value"] = json!(res_tlf(&tr)?.to_canonical_string());
            }
            Ok(out.into())
        }
        Command::Counterexample { b } => {
            if fa.characteristic != 0 || fa.ext_poly.is_some() {
                return Err(Error::Domain("the example is stated over Q".into()));
            }
            let b = match b {
                Some(text) => {
                    let k = TlfDescriptor::new(2, ExtField::trivial(BaseKind::Rational))
                        .with_window(fa.window.unwrap_or(DEFAULT_WINDOW));
                    Some(parse_series(&k, text)?)
                }
                None => None,
            };
            let (st, nt) = counterexample_char0(b)?;
            Ok(json!({ "res_st": st.to_canonical_string(), "res_nt": nt.to_canonical_string() }).into())
        }
        Command::Certify { op, target } => {
            let k = descriptor(fa, &[op])?;
            let phi = parse_operator(&k, op)?;
            let target = Target::parse(target)?;
            let cert = certify(&phi, target)?;
            let replayed = cert.replay(&phi, 8, cli.seed)?;
            Ok(json!({
                "operator": phi.to_json(),
                "target": target.label(),
                "certificate": cert.to_json(),
                "replayed_probes": replayed,
            })
            .into())
        }
        Command::Decompose { level, sigma } => {
            let k = descriptor(fa, &[])?;
            let sys = match sigma {
                Some(text) => lifting_system_from_json(&k, &json_arg(text)?)?,
                None => LiftingSystem::standard(k.n),
            };
            let d = decompose_identity(&k, *level, &sys)?;
            let mut parts = Vec::new();
            for (phi, cert) in [(&d.phi1, &d.cert1), (&d.phi2, &d.cert2)] {
                let replayed = cert.replay(phi, 8, cli.seed)?;
                let text = format_operator(phi).ok();
                parts.push(json!({
                    "operator": phi.to_json(),
                    "infix": text,
                    "certificate": cert.to_json(),
                    "replayed_probes": replayed,
                }));
            }
            Ok(json!({ "level": d.level, "sigma": sys.to_json(), "parts": parts }).into())
        }
        Command::TraceOp { op } => {
            let k = descriptor(fa, &[op])?;
            let phi = parse_operator(&k, op)?;
            Ok(finite_potent_trace(&phi)?.to_json().into())
        }
        Command::GlobalSum { text, form } => {
            if fa.ext_poly.is_some() {
                return Err(Error::Domain("global sums are taken over Q or a prime field".into()));
            }
            let kind = BaseKind::from_char(fa.characteristic)?;
            let text = text.as_deref().or(form.as_deref()).expect("clap requires one");
            Ok(global_residue_sum(&parse_rational_form(kind, text)?)?.to_json().into())
        }
        Command::LiftMatrix { level, l, axis, c, depth } => {
            let mut k = descriptor(fa, &[])?;
            if fa.n.is_none() {
                k.n = 2.max(level + 1);
            }
            let axis = axis.unwrap_or(level + 1);
            let inner = TlfDescriptor::new(k.n - level, k.field.clone()).with_window(k.window);
            let c = parse_series(&inner, c)?;
            let tw = LiftingSpec::twisted(&k, *level, axis, c, depth.unwrap_or(*l))?;
            let a = ArtinianQuotient { level: *level, l: *l };
            let basis = monomial_basis(&k, &a);
            let m = change_of_lifting_matrix(&k, &a, &LiftingSpec::Standard, &tw, &basis)?;
            let mut out = m.to_json();
            out["unit_upper_triangular"] = json!(m.is_unit_upper_triangular());
            out["sigma_prime"] = tw.to_json(*level);
            Ok(out.into())
        }
        Command::Selftest { only } => {
            let reports = match only {
                Some(id) if (1..=10).contains(id) => vec![selftest::run(*id, cli.seed)],
                Some(id) => return Err(Error::Domain(format!("criteria are numbered 1..=10, got {id}"))),
                None => selftest::run_all(cli.seed),
            };
            for r in &reports {
                eprintln!("{}", r.line());
            }
            let ok = reports.iter().all(|r| r.passed);
            let list: Vec<Value> = reports.iter().map(|r| r.to_json()).collect();
            Ok(Output { value: json!({ "seed": cli.seed, "passed": ok, "criteria": list }), ok })
        }
    }
}

fn descriptor(fa: &FieldArgs, texts: &[&String]) -> Result<TlfDescriptor> {
    let kind = BaseKind::from_char(fa.characteristic)?;
    let field = match &fa.ext_poly {
        Some(p) => ext_field(kind, p)?,
        None => ExtField::trivial(kind),
    };
    let n = match fa.n {
        Some(0) => return Err(Error::Domain("n must be at least 1".into())),
        Some(n) => n,
        None => texts.iter().map(|t| highest_generator(t)).max().unwrap_or(0).max(1),
    };
    Ok(TlfDescriptor::new(n, field).with_window(fa.window.unwrap_or(DEFAULT_WINDOW)))
}

/// Largest `i` among identifiers `t<i>`, `d<i>` and `proj<i>`.
fn highest_generator(text: &str) -> usize {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter_map(|w| {
            let digits = w.strip_prefix("proj").or_else(|| w.strip_prefix('t')).or_else(|| w.strip_prefix('d'))?;
            digits.parse::<usize>().ok()
        })
        .max()
        .unwrap_or(0)
}

fn ext_field(kind: BaseKind, poly: &str) -> Result<Arc<ExtField>> {
    let w = parse_rational_form(kind, &format!("{} dt", poly.replace('x', "t")))?;
    if w.den().degree() != Some(0) {
        return Err(Error::Domain("extension polynomial must be a polynomial in x".into()));
    }
    let lead = w.den().leading().inv()?;
    ExtField::new(kind, w.num().scale(&lead).coeffs().to_vec())
}

fn json_arg(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse { position: e.column().saturating_sub(1), expected: e.to_string() })
}
