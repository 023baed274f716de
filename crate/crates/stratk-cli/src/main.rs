//! Command-line front end over JSON documents: validation, assembly,
//! classification, bundle algebra, tangent families, and K-theory reports.
//!
//! Exit codes: 0 on success, 1 on validation failure, 2 on usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use num_traits::Zero;
use serde_json::{Map, Value};

use stratk::bundle::{classify_bundles, pullback_bundle, validate_bundle, VBundle};
use stratk::complex::{assemble, validate_cellular, CellComplex, StratifiedSpace};
use stratk::error::Error;
use stratk::functorial::{map_bundle, map_bundle2, map_stratified, map_stratified2};
use stratk::io;
use stratk::ktheory::{
    enumerate_classes, grothendieck, hom_matrix_in_basis, pullback_hom, restriction_hom,
    GroupHom, KGroup, RestrictTarget,
};
use stratk::lincat::{
    norm_bound_check, validate_category, BifunctorRule, FunctorRule, MatrixBifunctor,
    MatrixFunctor,
};
use stratk::matrix::{Q, QMat};
use stratk::report::ValidationReport;
use stratk::snf::smith_normal_form;
use stratk::strata::{flatten, validate_stratified};
use stratk::tangent::build_tangent;

#[derive(Parser)]
#[command(
    name = "stratk",
    version,
    about = "Stratified spaces, vector bundles over structure categories, and their K-theory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Stable-window rank cap for classification and K-theory.
    #[arg(long, global = true, default_value_t = 4)]
    cap: usize,
    /// Structure category: a builtin name such as "signed_perm(2)",
    /// "gl_open(3)", "vect_open(3)", "trivial", or a path to a category
    /// document.
    #[arg(long, global = true)]
    category: Option<String>,
    /// Seed for sampled property checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Writes the JSON report or result document to this path.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Suppresses human-readable output; exit codes and --json still apply.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validates a document: category, complex, map, space, bundle,
    /// stratified bundle, or polytope.
    Validate { file: PathBuf },
    /// Assembles a stratified space into its total complex.
    Assemble { file: PathBuf },
    /// Classifies bundles over a complex (or a space's total) up to gauge
    /// equivalence within the rank cap.
    Classify { file: PathBuf },
    /// Direct sum of two bundles or two stratified bundles.
    Sum { left: PathBuf, right: PathBuf },
    /// Tensor product of two bundles or two stratified bundles.
    Tensor { left: PathBuf, right: PathBuf },
    /// Applies a functor rule (identity, dual, det, zero, tensor-by:<k>)
    /// to a bundle or stratified bundle.
    ApplyFunctor { file: PathBuf, rule: String },
    /// Pulls a bundle back along a cellular map; stratified bundles also
    /// need --space for the source stratification.
    Pullback {
        map: PathBuf,
        bundle: PathBuf,
        /// Source space document for stratified pullbacks; the map must go
        /// from this space's assembled total to the bundle's total.
        #[arg(long)]
        space: Option<PathBuf>,
    },
    /// Collapses a stratified bundle to a flat cocycle on its total;
    /// rejects non-invertible attaching maps.
    Flatten { file: PathBuf },
    /// Stratified tangent bundle of a polytopal manifold, with the
    /// per-stratum cell and fiber-dimension report.
    Tangent { file: PathBuf },
    /// Grothendieck group of stratified bundle classes over a space,
    /// within the rank cap.
    K0 { file: PathBuf },
    /// Restriction or pullback homomorphism out of a space's K-group.
    K0Hom {
        file: PathBuf,
        /// Restriction target: "base" or "layer:<i>".
        #[arg(long)]
        restrict: Option<String>,
        /// Cellular map document for a pullback homomorphism. The map must
        /// go from the --onto space's assembled total to this space's
        /// assembled total.
        #[arg(long)]
        map: Option<PathBuf>,
        /// Space the pullback lands over; defaults to the main space.
        #[arg(long)]
        onto: Option<PathBuf>,
    },
    /// Runs the bundled invariant suite, or validates the given files.
    Check { files: Vec<PathBuf> },
}

struct Fail {
    code: u8,
    message: String,
}

impl Fail {
    fn usage(message: impl Into<String>) -> Self {
        Fail { code: 2, message: message.into() }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Fail { code: 1, message: message.into() }
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::invalid(e.to_string())
    }
}

type CliResult<T> = Result<T, Fail>;

struct Emit {
    quiet: bool,
    json_path: Option<PathBuf>,
}

impl Emit {
    fn say(&self, text: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", text.as_ref());
        }
    }

    fn write_json(&self, doc: &Value) -> CliResult<()> {
        if let Some(path) = &self.json_path {
            fs::write(path, io::to_pretty_string(doc))
                .map_err(|e| Fail::usage(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let emit = Emit { quiet: cli.quiet, json_path: cli.json.clone() };
    match run(&cli, &emit) {
        Ok(code) => code,
        Err(fail) => {
            eprintln!("error: {}", fail.message);
            ExitCode::from(fail.code)
        }
    }
}

fn run(cli: &Cli, emit: &Emit) -> CliResult<ExitCode> {
    match &cli.command {
        Command::Validate { file } => cmd_validate(file, emit),
        Command::Assemble { file } => cmd_assemble(file, emit),
        Command::Classify { file } => cmd_classify(file, cli, emit),
        Command::Sum { left, right } => {
            cmd_bifunctor("oplus", BifunctorRule::DirectSum, left, right, cli, emit)
        }
        Command::Tensor { left, right } => {
            cmd_bifunctor("otimes", BifunctorRule::Tensor, left, right, cli, emit)
        }
        Command::ApplyFunctor { file, rule } => cmd_apply_functor(file, rule, emit),
        Command::Pullback { map, bundle, space } => {
            cmd_pullback(map, bundle, space.as_deref(), emit)
        }
        Command::Flatten { file } => cmd_flatten(file, emit),
        Command::Tangent { file } => cmd_tangent(file, emit),
        Command::K0 { file } => cmd_k0(file, cli, emit),
        Command::K0Hom { file, restrict, map, onto } => {
            cmd_k0_hom(file, restrict.as_deref(), map.as_deref(), onto.as_deref(), cli, emit)
        }
        Command::Check { files } => cmd_check(files, cli, emit),
    }
}

fn read_doc(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Fail::usage(format!("cannot read {}: {e}", path.display())))?;
    io::parse_str(&text).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))
}

fn doc_kind(doc: &Value, path: &Path) -> CliResult<String> {
    io::document_kind(doc).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))
}

fn resolve_category(cli: &Cli) -> CliResult<Arc<stratk::lincat::StructureCategory>> {
    let Some(spec) = &cli.category else {
        return Err(Fail::usage("this verb needs --category <name|path>"));
    };
    let value = if Path::new(spec).exists() {
        read_doc(Path::new(spec))?
    } else {
        Value::String(spec.clone())
    };
    io::category_from_json(&value)
        .map(Arc::new)
        .map_err(|e| Fail::usage(format!("--category {spec}: {e}")))
}

/// Space under a document that is either a space or a bare complex.
fn space_of(doc: &Value, path: &Path) -> CliResult<StratifiedSpace> {
    match doc_kind(doc, path)?.as_str() {
        "space" => Ok(io::space_from_json(doc)?),
        "complex" => Ok(StratifiedSpace::base_only(io::complex_from_json(doc)?)),
        other => Err(Fail::usage(format!(
            "{}: expected a space or complex document, found {other:?}",
            path.display()
        ))),
    }
}

fn load_failure(subject: String, e: Error) -> ValidationReport {
    let mut r = ValidationReport::new(subject);
    r.push("load", e.to_string());
    r
}

fn report_for_document(path: &Path) -> CliResult<ValidationReport> {
    let doc = read_doc(path)?;
    let kind = doc_kind(&doc, path)?;
    let subject = format!("{} {}", kind, path.display());
    let report = match kind.as_str() {
        "category" => match io::category_from_json(&doc) {
            Ok(cat) => validate_category(&cat),
            Err(e) => load_failure(subject, e),
        },
        "complex" => match io::complex_from_json(&doc) {
            Ok(c) => c.validate_complex(),
            Err(e) => load_failure(subject, e),
        },
        "map" => match io::map_from_json(&doc) {
            Ok(f) => validate_cellular(&f),
            Err(e) => load_failure(subject, e),
        },
        "space" => match io::space_from_json(&doc) {
            Ok(s) => {
                let mut r = ValidationReport::new(subject);
                if let Err(e) = assemble(&s) {
                    r.push("assemble", e.to_string());
                }
                r
            }
            Err(e) => load_failure(subject, e),
        },
        "bundle" => match io::bundle_from_json(&doc) {
            Ok(b) => validate_bundle(&b),
            Err(e) => load_failure(subject, e),
        },
        "stratified_bundle" => match io::stratified_from_json(&doc) {
            Ok(x) => match validate_stratified(&x) {
                Ok(r) => r,
                Err(e) => load_failure(subject, e),
            },
            Err(e) => load_failure(subject, e),
        },
        "polytope" => match io::polytope_from_json(&doc) {
            Ok(p) => p.validate(),
            Err(e) => load_failure(subject, e),
        },
        other => {
            return Err(Fail::usage(format!(
                "{}: no validator for document kind {other:?}",
                path.display()
            )))
        }
    };
    Ok(report)
}

fn print_report(report: &ValidationReport, emit: &Emit) {
    if report.is_valid() {
        emit.say(format!("{}: valid", report.subject));
    } else {
        for v in &report.violations {
            emit.say(format!("{}: {}: {}", report.subject, v.rule, v.detail));
        }
        emit.say(format!(
            "{}: {} violation(s)",
            report.subject,
            report.violations.len()
        ));
    }
}

fn cmd_validate(path: &Path, emit: &Emit) -> CliResult<ExitCode> {
    let report = report_for_document(path)?;
    emit.write_json(&io::report_to_json(&report))?;
    print_report(&report, emit);
    Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn stratum_cell_counts(total: &CellComplex, strata: usize) -> Vec<usize> {
    (0..strata)
        .map(|s| total.cells.values().filter(|c| c.stratum == Some(s)).count())
        .collect()
}

fn cmd_assemble(path: &Path, emit: &Emit) -> CliResult<ExitCode> {
    let doc = read_doc(path)?;
    let kind = doc_kind(&doc, path)?;
    if kind != "space" {
        return Err(Fail::usage(format!(
            "{}: assemble needs a space document, found {kind:?}",
            path.display()
        )));
    }
    let space = io::space_from_json(&doc)?;
    let asm = assemble(&space)?;
    emit.write_json(&io::complex_to_json(&asm.total))?;
    emit.say(format!(
        "total: {} cells, dim counts {:?}",
        asm.total.cells.len(),
        asm.total.dim_counts()
    ));
    for (s, n) in stratum_cell_counts(&asm.total, space.layers.len() + 1)
        .iter()
        .enumerate()
    {
        emit.say(format!("stratum {s}: {n} cells"));
    }
    Ok(ExitCode::SUCCESS)
}

fn sorted_fiber_dims(b: &VBundle) -> Vec<usize> {
    b.fiber.values().map(|o| o.dim).collect()
}

fn cmd_classify(path: &Path, cli: &Cli, emit: &Emit) -> CliResult<ExitCode> {
    let doc = read_doc(path)?;
    let base = match doc_kind(&doc, path)?.as_str() {
        "complex" => io::complex_from_json(&doc)?,
        "space" => assemble(&io::space_from_json(&doc)?)?.total,
        other => {
            return Err(Fail::usage(format!(
                "{}: classify needs a complex or space document, found {other:?}",
                path.display()
            )))
        }
    };
    let category = resolve_category(cli)?;
    let classes = classify_bundles(&base, &category, cli.cap)?;
    let mut m = Map::new();
    m.insert("schema".to_string(), Value::String("stratk-1".to_string()));
    m.insert("kind".to_string(), Value::String("classification".to_string()));
    m.insert("category".to_string(), Value::String(category.name.clone()));
    m.insert("window".to_string(), Value::from(cli.cap));
    m.insert("class_count".to_string(), Value::from(classes.len()));
    m.insert(
        "classes".to_string(),
        Value::Array(classes.iter().map(io::bundle_to_json).collect()),
    );
    emit.write_json(&Value::Object(m))?;
    emit.say(format!(
        "{} isomorphism classes within stable window {}",
        classes.len(),
        cli.cap
    ));
    for (i, b) in classes.iter().enumerate() {
        let nontrivial = b.labels.values().filter(|l| !l.is_identity()).count();
        emit.say(format!(
            "class {i}: fiber dims {:?}, {nontrivial} non-identity label(s)",
            sorted_fiber_dims(b)
        ));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bifunctor(
    name: &str,
    rule: BifunctorRule,
    left: &Path,
    right: &Path,
    cli: &Cli,
    emit: &Emit,
) -> CliResult<ExitCode> {
    let ldoc = read_doc(left)?;
    let rdoc = read_doc(right)?;
    let lkind = doc_kind(&ldoc, left)?;
    let rkind = doc_kind(&rdoc, right)?;
    if lkind != rkind {
        return Err(Fail::usage(format!(
            "operands have different kinds: {lkind:?} and {rkind:?}"
        )));
    }
    // Results may need objects outside the operands' category; --category
    // names the target category they land in.
    let target_override = match &cli.category {
        Some(_) => Some(resolve_category(cli)?),
        None => None,
    };
    match lkind.as_str() {
        "bundle" => {
            let a = io::bundle_from_json(&ldoc)?;
            let b = io::bundle_from_json(&rdoc)?;
            let target = target_override.clone().unwrap_or_else(|| a.category.clone());
            let bf = MatrixBifunctor::new(
                name,
                a.category.clone(),
                a.category.clone(),
                target,
                rule,
            );
            let out = map_bundle2(&bf, &a, &b)?;
            emit.write_json(&io::bundle_to_json(&out))?;
            emit.say(format!(
                "{name}: fiber dims {:?} over {} base cells",
                sorted_fiber_dims(&out),
                out.base.cells.len()
            ));
        }
        "stratified_bundle" => {
            let a = io::stratified_from_json(&ldoc)?;
            let b = io::stratified_from_json(&rdoc)?;
            let target = target_override.unwrap_or_else(|| a.layer0.category.clone());
            let bf = MatrixBifunctor::new(
                name,
                a.layer0.category.clone(),
                a.layer0.category.clone(),
                target,
                rule,
            );
            let out = map_stratified2(&bf, &a, &b)?;
            emit.write_json(&io::stratified_to_json(&out))?;
            emit.say(format!(
                "{name}: fiber dims per stratum {:?}",
                out.stratum_fiber_dims()
            ));
        }
        other => {
            return Err(Fail::usage(format!(
                "{name} needs bundle or stratified_bundle documents, found {other:?}"
            )))
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_rule(s: &str) -> CliResult<FunctorRule> {
    match s {
        "identity" => Ok(FunctorRule::Identity),
        "dual" => Ok(FunctorRule::DualInverseTranspose),
        "det" => Ok(FunctorRule::Determinant),
        "zero" => Ok(FunctorRule::ZeroObject),
        _ => s
            .strip_prefix("tensor-by:")
            .and_then(|k| k.parse::<usize>().ok())
            .map(FunctorRule::TensorByObject)
            .ok_or_else(|| {
                Fail::usage(format!(
                    "unknown functor rule {s:?}; use identity, dual, det, zero, or tensor-by:<k>"
                ))
            }),
    }
}

fn cmd_apply_functor(path: &Path, rule: &str, emit: &Emit) -> CliResult<ExitCode> {
    let doc = read_doc(path)?;
    let parsed = parse_rule(rule)?;
    match doc_kind(&doc, path)?.as_str() {
        "bundle" => {
            let b = io::bundle_from_json(&doc)?;
            let functor =
                MatrixFunctor::new(rule, b.category.clone(), b.category.clone(), parsed);
            let out = map_bundle(&functor, &b)?;
            emit.write_json(&io::bundle_to_json(&out))?;
            emit.say(format!("{rule}: fiber dims {:?}", sorted_fiber_dims(&out)));
        }
        "stratified_bundle" => {
            let x = io::stratified_from_json(&doc)?;
            let functor = MatrixFunctor::new(
                rule,
                x.layer0.category.clone(),
                x.layer0.category.clone(),
                parsed,
            );
            let out = map_stratified(&functor, &x)?;
            emit.write_json(&io::stratified_to_json(&out))?;
            emit.say(format!(
                "{rule}: fiber dims per stratum {:?}",
                out.stratum_fiber_dims()
            ));
        }
        other => {
            return Err(Fail::usage(format!(
                "{}: apply-functor needs a bundle or stratified_bundle document, found {other:?}",
                path.display()
            )))
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_pullback(
    map_path: &Path,
    bundle_path: &Path,
    space_path: Option<&Path>,
    emit: &Emit,
) -> CliResult<ExitCode> {
    let map_doc = read_doc(map_path)?;
    if doc_kind(&map_doc, map_path)? != "map" {
        return Err(Fail::usage(format!(
            "{}: pullback needs a map document first",
            map_path.display()
        )));
    }
    let f = io::map_from_json(&map_doc)?;
    let bdoc = read_doc(bundle_path)?;
    match doc_kind(&bdoc, bundle_path)?.as_str() {
        "bundle" => {
            let b = io::bundle_from_json(&bdoc)?;
            let out = pullback_bundle(&f, &b)?;
            emit.write_json(&io::bundle_to_json(&out))?;
            emit.say(format!(
                "pullback: fiber dims {:?} over {} base cells",
                sorted_fiber_dims(&out),
                out.base.cells.len()
            ));
        }
        "stratified_bundle" => {
            let Some(space_path) = space_path else {
                return Err(Fail::usage(
                    "stratified pullbacks need --space <src_space.json>",
                ));
            };
            let sdoc = read_doc(space_path)?;
            let src_space = space_of(&sdoc, space_path)?;
            let x = io::stratified_from_json(&bdoc)?;
            let out = stratk::strata::pullback_stratified(&src_space, &f, &x)?;
            emit.write_json(&io::stratified_to_json(&out))?;
            emit.say(format!(
                "pullback: fiber dims per stratum {:?}",
                out.stratum_fiber_dims()
            ));
        }
        other => {
            return Err(Fail::usage(format!(
                "{}: pullback needs a bundle or stratified_bundle document, found {other:?}",
                bundle_path.display()
            )))
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_flatten(path: &Path, emit: &Emit) -> CliResult<ExitCode> {
    let doc = read_doc(path)?;
    if doc_kind(&doc, path)? != "stratified_bundle" {
        return Err(Fail::usage(format!(
            "{}: flatten needs a stratified_bundle document",
            path.display()
        )));
    }
    let x = io::stratified_from_json(&doc)?;
    let flat = flatten(&x)?;
    emit.write_json(&io::bundle_to_json(&flat))?;
    emit.say(format!(
        "flat cocycle over {} total cells, fiber dims {:?}",
        flat.base.cells.len(),
        sorted_fiber_dims(&flat)
    ));
    Ok(ExitCode::SUCCESS)
}

fn cmd_tangent(path: &Path, emit: &Emit) -> CliResult<ExitCode> {
    let doc = read_doc(path)?;
    if doc_kind(&doc, path)? != "polytope" {
        return Err(Fail::usage(format!(
            "{}: tangent needs a polytope document",
            path.display()
        )));
    }
    let p = io::polytope_from_json(&doc)?;
    let x = build_tangent(&p)?;
    let asm = assemble(&x.space)?;
    emit.write_json(&io::stratified_to_json(&x))?;
    let fiber_dims = x.stratum_fiber_dims();
    let cells = stratum_cell_counts(&asm.total, fiber_dims.len());
    for (s, dims) in fiber_dims.iter().enumerate() {
        let dims: Vec<usize> = dims.iter().copied().collect();
        emit.say(format!(
            "stratum {s}: {} cells, fiber dims {:?}",
            cells[s], dims
        ));
    }
    Ok(ExitCode::SUCCESS)
}

fn compute_k0(
    space: &StratifiedSpace,
    cli: &Cli,
) -> CliResult<KGroup> {
    let category = resolve_category(cli)?;
    let monoid = enumerate_classes(space, category, cli.cap)?;
    Ok(grothendieck(monoid)?)
}

fn say_k0(k: &KGroup, emit: &Emit) {
    emit.say(format!(
        "classes: {} ({} nonzero generators)",
        k.monoid.classes.len(),
        k.generators.len()
    ));
    emit.say(format!(
        "presentation: {} (within stable window {})",
        k.presentation, k.window
    ));
    if k.monoid.partial {
        emit.say("window: partial, some candidates could not be classified");
    }
}

fn cmd_k0(path: &Path, cli: &Cli, emit: &Emit) -> CliResult<ExitCode> {
    let doc = read_doc(path)?;
    let space = space_of(&doc, path)?;
    let k = compute_k0(&space, cli)?;
    emit.write_json(&io::k0_to_json(&k))?;
    say_k0(&k, emit);
    Ok(ExitCode::SUCCESS)
}

/// Greedy basis of the free part: class indices whose images are linearly
/// independent, in generator order. Torsion groups have no such basis.
fn free_basis(k: &KGroup) -> Option<Vec<usize>> {
    if !k.torsion.is_empty() {
        return None;
    }
    let mut chosen = Vec::new();
    let mut rows: Vec<Vec<Q>> = Vec::new();
    for &idx in &k.generators {
        if chosen.len() == k.free_rank {
            break;
        }
        let el = k.class_map(idx).ok()?;
        let row: Vec<Q> = el.free.iter().map(|b| Q::from(b.clone())).collect();
        let mut stacked = rows.clone();
        stacked.push(row.clone());
        let m = QMat::from_rows(stacked).ok()?;
        let rank = m.cols() - m.nullspace().len();
        if rank > rows.len() {
            rows.push(row);
            chosen.push(idx);
        }
    }
    (chosen.len() == k.free_rank).then_some(chosen)
}

fn hom_to_json(
    hom: &GroupHom,
    description: &str,
    window: usize,
    matrix: Option<(&Vec<usize>, &Vec<usize>, &stratk::snf::ZMat)>,
) -> Value {
    let mut m = Map::new();
    m.insert("schema".to_string(), Value::String("stratk-1".to_string()));
    m.insert("kind".to_string(), Value::String("k0_hom_report".to_string()));
    m.insert("description".to_string(), Value::String(description.to_string()));
    m.insert("window".to_string(), Value::from(window));
    m.insert("additive".to_string(), Value::Bool(hom.additive));
    m.insert("partial".to_string(), Value::Bool(hom.partial));
    m.insert(
        "image_classes".to_string(),
        Value::Array(
            hom.image_classes
                .iter()
                .map(|c| match c {
                    Some(j) => Value::from(*j),
                    None => Value::Null,
                })
                .collect(),
        ),
    );
    if let Some((src_basis, tgt_basis, mat)) = matrix {
        let rows: Vec<Value> = (0..mat.rows())
            .map(|r| {
                Value::Array(
                    (0..mat.cols())
                        .map(|c| Value::String(mat.at(r, c).to_string()))
                        .collect(),
                )
            })
            .collect();
        let mut mm = Map::new();
        mm.insert(
            "src_basis".to_string(),
            Value::Array(src_basis.iter().map(|&i| Value::from(i)).collect()),
        );
        mm.insert(
            "tgt_basis".to_string(),
            Value::Array(tgt_basis.iter().map(|&i| Value::from(i)).collect()),
        );
        mm.insert("rows".to_string(), Value::Array(rows));
        m.insert("matrix".to_string(), Value::Object(mm));
    }
    Value::Object(m)
}

fn cmd_k0_hom(
    path: &Path,
    restrict: Option<&str>,
    map_path: Option<&Path>,
    onto_path: Option<&Path>,
    cli: &Cli,
    emit: &Emit,
) -> CliResult<ExitCode> {
    let doc = read_doc(path)?;
    let space = space_of(&doc, path)?;
    let k_src = compute_k0(&space, cli)?;
    let (hom, k_tgt, description) = match (restrict, map_path) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(Fail::usage("pass exactly one of --restrict or --map"))
        }
        (Some(spec), None) => {
            let target = match spec {
                "base" => RestrictTarget::Base,
                _ => {
                    let idx = spec
                        .strip_prefix("layer:")
                        .and_then(|i| i.parse::<usize>().ok())
                        .ok_or_else(|| {
                            Fail::usage(format!(
                                "--restrict takes \"base\" or \"layer:<i>\", got {spec:?}"
                            ))
                        })?;
                    RestrictTarget::Layer(idx)
                }
            };
            let tgt_space = match target {
                RestrictTarget::Base => StratifiedSpace::base_only(space.base0.clone()),
                RestrictTarget::Layer(i) => {
                    let layer = space.layers.get(i).ok_or_else(|| {
                        Fail::invalid(format!("space has no layer {i} to restrict to"))
                    })?;
                    StratifiedSpace::base_only(layer.m.clone())
                }
            };
            let k_tgt = compute_k0(&tgt_space, cli)?;
            let hom = restriction_hom(&k_src, target, &k_tgt)?;
            (hom, k_tgt, format!("restriction to {spec}"))
        }
        (None, Some(map_path)) => {
            let mdoc = read_doc(map_path)?;
            if doc_kind(&mdoc, map_path)? != "map" {
                return Err(Fail::usage(format!(
                    "{}: --map needs a map document",
                    map_path.display()
                )));
            }
            let f = io::map_from_json(&mdoc)?;
            let k_tgt = match onto_path {
                Some(p) => {
                    let odoc = read_doc(p)?;
                    compute_k0(&space_of(&odoc, p)?, cli)?
                }
                None => compute_k0(&space, cli)?,
            };
            let hom = pullback_hom(&f, &k_src, &k_tgt)?;
            (hom, k_tgt, "pullback".to_string())
        }
    };
    let matrix = free_basis(&k_src).and_then(|src_basis| {
        free_basis(&k_tgt).and_then(|tgt_basis| {
            hom_matrix_in_basis(&hom, &k_src, &k_tgt, &src_basis, &tgt_basis)
                .ok()
                .map(|m| (src_basis, tgt_basis, m))
        })
    });
    emit.write_json(&hom_to_json(
        &hom,
        &description,
        k_src.window,
        matrix.as_ref().map(|(s, t, m)| (s, t, m)),
    ))?;
    emit.say(format!(
        "{description}: additive={}, partial={}",
        hom.additive, hom.partial
    ));
    for (i, c) in hom.image_classes.iter().enumerate() {
        match c {
            Some(j) => emit.say(format!("class {i} -> class {j}")),
            None => emit.say(format!("class {i} -> outside window")),
        }
    }
    if let Some((src_basis, tgt_basis, m)) = &matrix {
        emit.say(format!(
            "matrix in bases src {src_basis:?} -> tgt {tgt_basis:?}:"
        ));
        for r in 0..m.rows() {
            let row: Vec<String> = (0..m.cols()).map(|c| m.at(r, c).to_string()).collect();
            emit.say(format!("[ {} ]", row.join(" ")));
        }
    }
    Ok(ExitCode::SUCCESS)
}

struct Suite {
    name: &'static str,
    checked: usize,
    violations: Vec<String>,
}

fn suite_from_reports(name: &'static str, reports: Vec<ValidationReport>) -> Suite {
    let checked = reports.len();
    let violations = reports
        .iter()
        .flat_map(|r| {
            r.violations
                .iter()
                .map(move |v| format!("{}: {}: {}", r.subject, v.rule, v.detail))
        })
        .collect();
    Suite { name, checked, violations }
}

fn bundled_suites(seed: u64) -> Vec<Suite> {
    let mut suites = Vec::new();
    suites.push(suite_from_reports(
        "flatten-dichotomy",
        vec![stratk::fixtures::corpus_report()],
    ));
    suites.push(suite_from_reports(
        "algebraic-laws",
        (seed..seed + 25)
            .map(|s| stratk::fixtures::law_report(&stratk::fixtures::law_instance(s)))
            .collect(),
    ));
    suites.push(suite_from_reports(
        "homotopy-invariance",
        stratk::fixtures::prism_homotopy_cases()
            .iter()
            .map(stratk::fixtures::homotopy_report)
            .collect(),
    ));
    let mut norm = Suite { name: "norm-bound", checked: 0, violations: Vec::new() };
    for s in seed..seed + 50 {
        norm.checked += 1;
        let (beta, r, f) = stratk::fixtures::norm_bound_instance(s);
        match norm_bound_check(&beta, &r, &f, 5, s) {
            Ok(outcome) if outcome.holds => {}
            Ok(outcome) => norm.violations.push(format!(
                "seed {s}: bound violated, max ratio {}",
                outcome.max_ratio
            )),
            Err(e) => norm.violations.push(format!("seed {s}: {e}")),
        }
    }
    suites.push(norm);
    let mut snf = Suite { name: "smith-form", checked: 0, violations: Vec::new() };
    for s in seed..seed + 20 {
        snf.checked += 1;
        let m = stratk::fixtures::integer_matrix_instance(s, 6, 9);
        let form = smith_normal_form(&m);
        let uav = form
            .u
            .mul(&m)
            .and_then(|um| um.mul(&form.v));
        match uav {
            Ok(d) if d == form.d => {}
            Ok(_) => snf.violations.push(format!("seed {s}: U A V differs from D")),
            Err(e) => snf.violations.push(format!("seed {s}: {e}")),
        }
        let divisors = form.divisors();
        for w in divisors.windows(2) {
            if !(&w[1] % &w[0]).is_zero() {
                snf.violations
                    .push(format!("seed {s}: divisibility chain broken"));
            }
        }
    }
    suites.push(snf);
    suites
}

fn cmd_check(files: &[PathBuf], cli: &Cli, emit: &Emit) -> CliResult<ExitCode> {
    if files.is_empty() {
        let suites = bundled_suites(cli.seed);
        let mut arr = Vec::new();
        let mut failed = 0usize;
        for s in &suites {
            if s.violations.is_empty() {
                emit.say(format!("{}: ok ({} checked)", s.name, s.checked));
            } else {
                failed += s.violations.len();
                for v in &s.violations {
                    emit.say(format!("{}: {v}", s.name));
                }
            }
            let mut m = Map::new();
            m.insert("name".to_string(), Value::String(s.name.to_string()));
            m.insert("checked".to_string(), Value::from(s.checked));
            m.insert(
                "violations".to_string(),
                Value::Array(s.violations.iter().cloned().map(Value::String).collect()),
            );
            arr.push(Value::Object(m));
        }
        let mut top = Map::new();
        top.insert("schema".to_string(), Value::String("stratk-1".to_string()));
        top.insert("kind".to_string(), Value::String("check_report".to_string()));
        top.insert("seed".to_string(), Value::from(cli.seed));
        top.insert("suites".to_string(), Value::Array(arr));
        emit.write_json(&Value::Object(top))?;
        return Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) });
    }
    let mut all_valid = true;
    let mut reports = Vec::new();
    for file in files {
        let report = report_for_document(file)?;
        all_valid &= report.is_valid();
        print_report(&report, emit);
        reports.push(io::report_to_json(&report));
    }
    let mut top = Map::new();
    top.insert("schema".to_string(), Value::String("stratk-1".to_string()));
    top.insert("kind".to_string(), Value::String("check_report".to_string()));
    top.insert("reports".to_string(), Value::Array(reports));
    emit.write_json(&Value::Object(top))?;
    Ok(if all_valid { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
