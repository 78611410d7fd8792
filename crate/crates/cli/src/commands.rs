use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use transatlas::constructions::{
    gamma_u, glue_local_kernel, limit_embedding, morita_conjugation_check, morita_interleave, telescope_check,
    telescope_graph, GlueDoc, GraphDoc, MapDoc, MapFamilyDoc, PointMap, Surjection, TelescopeGraph,
    DEFAULT_MIN_TAIL,
};
use transatlas::group::{canonical_atlas, canonical_translation, FiniteGroup};
use transatlas::mspace::fin_space;
use transatlas::propa::{
    ball_certificate, kernel_to_vectors, l1_to_l2, truncate_normalize, vectors_to_kernel, verify_certificate,
    yusets_to_l1, Conversion, PropACertificate, Variant,
};
use transatlas::ptrans::{
    build_atlas_coloring, kappa_search, pullback_atlas, verify_atlas, Atlas, KappaOutcome, SearchCaps,
};
use transatlas::roe::{
    algebra_dimension, claim_matrix, positive_type_check, propagation, schur_multiply, translation_isometry, Kernel,
    KernelDoc, C64,
};
use transatlas::{Error, FiniteMetricSpace, Point};

use crate::report::Report;

#[derive(Debug, Parser)]
#[command(name = "transatlas", version, about = "Verify translation structures, kernels and certificates on finite metric spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Space document.
    #[arg(long, global = true)]
    pub space: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Numerical tolerance for eigenvalue and support decisions.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Recorded in the report; no command draws random numbers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Greedy colouring whose classes are R-separated.
    Separate {
        #[arg(long = "R")]
        r: u64,
    },
    #[command(subcommand)]
    Group(GroupCmd),
    #[command(subcommand)]
    Atlas(AtlasCmd),
    /// Least number of cotranslations needed at radius R.
    Kappa {
        #[arg(long = "R")]
        r: u64,
        /// Exhaustive search instead of the pullback upper bound.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        max_nodes: Option<u64>,
        /// Write the witness chart here.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    #[command(subcommand)]
    Roe(RoeCmd),
    #[command(subcommand)]
    Propa(PropaCmd),
    #[command(subcommand)]
    Telescope(TelescopeCmd),
    /// Disjoint union of the connected graphs of degree at most 3.
    Gammau {
        #[arg(long)]
        n_max: usize,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    #[command(subcommand)]
    Morita(MoritaCmd),
    /// Stable differences of a nested family of maps into a group.
    LimitEmbed {
        #[arg(long)]
        group: PathBuf,
        #[arg(long)]
        maps: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_TAIL)]
        min_tail: usize,
    },
    /// Glue local kernels on a partition into one kernel.
    Glue {
        #[arg(long)]
        blocks: PathBuf,
        #[arg(long = "R")]
        r: u64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SpaceCmd {
    /// Check every metric axiom of the space document.
    Validate,
    /// Union of the first K nonempty subsets, stacked at heights i².
    Fin {
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum GroupCmd {
    Validate {
        #[arg(long)]
        group: PathBuf,
    },
    /// Word metric of the group as a space document.
    Metric {
        #[arg(long)]
        group: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Coloring,
    Canonical,
    Pullback,
}

#[derive(Debug, Subcommand)]
pub enum AtlasCmd {
    Build {
        #[arg(long, value_enum)]
        method: Method,
        /// Radii, comma separated.
        #[arg(long = "R", value_delimiter = ',', required = true)]
        radii: Vec<u64>,
        #[arg(long)]
        group: Option<PathBuf>,
        /// Injection of the space into the group (pullback).
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    Verify {
        #[arg(long)]
        atlas: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum RoeCmd {
    Propagation {
        #[arg(long)]
        kernel: PathBuf,
        /// Fail when the propagation exceeds this.
        #[arg(long)]
        max: Option<u64>,
    },
    Psd {
        #[arg(long)]
        kernel: PathBuf,
    },
    /// Entrywise product `u ∘ T`.
    Schur {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        operator: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    AlgebraDim {
        /// Generator kernels; repeat the flag for several.
        #[arg(long)]
        kernel: Vec<PathBuf>,
        /// Use the canonical translations of the group's generators.
        #[arg(long)]
        group: Option<PathBuf>,
        #[arg(long)]
        cap: Option<usize>,
        /// Fail unless the dimension equals this.
        #[arg(long)]
        expect: Option<usize>,
    },
    /// Block matrix of the chart at radius R.
    Claim {
        #[arg(long)]
        atlas: PathBuf,
        #[arg(long = "R")]
        r: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum PropaCmd {
    Verify {
        #[arg(long)]
        cert: PathBuf,
    },
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: String,
        /// Support radius of the produced vectors (kernel to l2).
        #[arg(long = "S")]
        s: Option<u64>,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Normalised ball indicators of radius S.
    BallCert {
        #[arg(long = "R")]
        r: u64,
        #[arg(long = "S")]
        s: u64,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TelescopeCmd {
    Build {
        /// Highest level of the graph.
        #[arg(long)]
        levels: u64,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    Check {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long = "R")]
        r: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum MoritaCmd {
    Interleave {
        /// Surjection onto the `--space` points.
        #[arg(long)]
        map: PathBuf,
        /// Domain space; when absent the domain is taken in map order.
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long = "J")]
        window: i64,
    },
    Conjugate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        source: PathBuf,
        /// Operator on the source space.
        #[arg(long)]
        kernel: PathBuf,
        /// `n,i` of the row part.
        #[arg(long, value_parser = parse_part)]
        rows: (usize, usize),
        #[arg(long, value_parser = parse_part)]
        cols: (usize, usize),
    },
}

fn parse_part(s: &str) -> std::result::Result<(usize, usize), String> {
    let (n, i) = s.split_once(',').ok_or_else(|| format!("expected `n,i`, got `{s}`"))?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok((num(n)?, num(i)?))
}

/// Loads documents and records their digests.
struct Ctx {
    tol: f64,
    space: Option<PathBuf>,
    inputs: BTreeMap<String, String>,
}

impl Ctx {
    fn read(&mut self, flag: &str, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read --{flag} {}", path.display()))?;
        self.inputs.insert(flag.to_string(), hex::encode(Sha256::digest(&bytes)));
        String::from_utf8(bytes).with_context(|| format!("--{flag} {} is not UTF-8", path.display()))
    }

    fn doc<T: DeserializeOwned>(&mut self, flag: &str, path: &Path) -> Result<T> {
        let text = self.read(flag, path)?;
        serde_json::from_str(&text).with_context(|| format!("malformed --{flag} document {}", path.display()))
    }

    fn space_path(&self) -> Result<PathBuf> {
        self.space.clone().ok_or_else(|| anyhow!("--space is required"))
    }

    fn space_ref(&self) -> String {
        self.space.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
    }

    fn space(&mut self) -> Result<FiniteMetricSpace> {
        let path = self.space_path()?;
        self.load_space("space", &path)
    }

    fn load_space(&mut self, flag: &str, path: &Path) -> Result<FiniteMetricSpace> {
        let text = self.read(flag, path)?;
        FiniteMetricSpace::from_json(&text).with_context(|| format!("invalid --{flag} document {}", path.display()))
    }

    fn group(&mut self, path: &Path) -> Result<FiniteGroup> {
        let text = self.read("group", path)?;
        FiniteGroup::from_json(&text).with_context(|| format!("invalid --group document {}", path.display()))
    }

    fn kernel(&mut self, flag: &str, path: &Path) -> Result<Kernel> {
        let doc: KernelDoc = self.doc(flag, path)?;
        Ok(Kernel::from_entries(&doc.entries, self.tol)?)
    }
}

fn ids(space: &FiniteMetricSpace, pts: &[Point]) -> Value {
    Value::Array(pts.iter().map(|&p| Value::String(space.id(p).to_string())).collect())
}

fn pair(space: &FiniteMetricSpace, (x, y): (Point, Point)) -> Value {
    ids(space, &[x, y])
}

fn write_doc(path: &Option<PathBuf>, doc: &impl Serialize) -> Result<()> {
    if let Some(p) = path {
        let mut text = serde_json::to_string_pretty(doc)?;
        text.push('\n');
        std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

/// Whether a library error reports a failed check on well-formed input
/// rather than a malformed document.
fn is_finding(e: &Error) -> bool {
    matches!(
        e,
        Error::Precondition(_)
            | Error::TooShallow(_)
            | Error::NotStabilizing(..)
            | Error::NotSurjective(_)
            | Error::NotInjective(_)
            | Error::NotHermitian(_)
            | Error::OverlappingBlocks(_)
            | Error::CapExceeded(_)
            | Error::UncertifiedEigen { .. }
            | Error::NoConvergence(_)
    )
}

/// Turns a finding into a failed verdict and passes other errors through.
fn finding<T>(report: &mut Report, name: &str, r: transatlas::Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if is_finding(&e) => {
            report.fail(name, json!({ "error": e.to_string() }));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn metric_witness(e: &Error) -> Value {
    let points: Vec<&str> = match e {
        Error::NonzeroDiagonal(a) => vec![a],
        Error::Asymmetric(a, b) | Error::NotUniformlyDiscrete(a, b) => vec![a, b],
        Error::Triangle { x, y, z } => vec![x, y, z],
        _ => vec![],
    };
    json!({ "error": e.to_string(), "points": points })
}

pub fn run(cli: Cli) -> Result<Report> {
    let mut ctx = Ctx { tol: cli.tol, space: cli.space, inputs: BTreeMap::new() };
    if !(cli.tol >= 0.0 && cli.tol.is_finite()) {
        bail!("--tol must be a nonnegative number");
    }
    let mut report = dispatch(&mut ctx, cli.command)?;
    report.inputs = ctx.inputs;
    if let Some(seed) = cli.seed {
        report.measure("seed", seed);
    }
    Ok(report)
}

fn dispatch(ctx: &mut Ctx, command: Command) -> Result<Report> {
    match command {
        Command::Space(SpaceCmd::Validate) => space_validate(ctx),
        Command::Space(SpaceCmd::Fin { k, emit }) => space_fin(ctx, k, &emit),
        Command::Separate { r } => separate(ctx, r),
        Command::Group(GroupCmd::Validate { group }) => group_validate(ctx, &group),
        Command::Group(GroupCmd::Metric { group, emit }) => group_metric(ctx, &group, &emit),
        Command::Atlas(AtlasCmd::Build { method, radii, group, map, emit }) => {
            atlas_build(ctx, method, &radii, group.as_deref(), map.as_deref(), &emit)
        }
        Command::Atlas(AtlasCmd::Verify { atlas }) => atlas_verify(ctx, &atlas),
        Command::Kappa { r, exact, max_nodes, emit } => kappa(ctx, r, exact, max_nodes, &emit),
        Command::Roe(cmd) => roe(ctx, cmd),
        Command::Propa(cmd) => propa(ctx, cmd),
        Command::Telescope(TelescopeCmd::Build { levels, emit }) => telescope_build(ctx, levels, &emit),
        Command::Telescope(TelescopeCmd::Check { graph, r }) => telescope_verify(ctx, &graph, r),
        Command::Gammau { n_max, emit } => gammau(ctx, n_max, &emit),
        Command::Morita(MoritaCmd::Interleave { map, source, window }) => {
            morita_interleave_cmd(ctx, &map, source.as_deref(), window)
        }
        Command::Morita(MoritaCmd::Conjugate { map, source, kernel, rows, cols }) => {
            morita_conjugate_cmd(ctx, &map, &source, &kernel, rows, cols)
        }
        Command::LimitEmbed { group, maps, min_tail } => limit_embed(ctx, &group, &maps, min_tail),
        Command::Glue { blocks, r, eps, emit } => glue(ctx, &blocks, r, eps, &emit),
    }
}

fn space_validate(ctx: &mut Ctx) -> Result<Report> {
    let mut report = Report::new("space validate");
    let path = ctx.space_path()?;
    let text = ctx.read("space", &path)?;
    match FiniteMetricSpace::from_json(&text) {
        Ok(x) => {
            report.verdict("metric", true, || unreachable!());
            report.measure("points", x.len());
            report.measure("diameter", x.diameter());
            report.measure("scale", x.scale());
        }
        Err(e @ (Error::Json(_) | Error::Schema(_))) => return Err(e.into()),
        Err(e) => report.fail("metric", metric_witness(&e)),
    }
    Ok(report)
}

fn space_fin(ctx: &mut Ctx, k: usize, emit: &Option<PathBuf>) -> Result<Report> {
    let mut report = Report::new("space fin");
    let x = ctx.space()?;
    let fin = fin_space(&x, k)?;
    report.measure("points", fin.space.len());
    report.measure("diameter", fin.space.diameter());
    let blocks: Vec<Value> = fin
        .blocks
        .iter()
        .map(|b| json!({ "index": b.index, "offset": b.offset, "members": ids(&x, &b.members) }))
        .collect();
    report.measure("blocks", blocks);
    write_doc(emit, &fin.space.to_doc())?;
    Ok(report)
}

fn separate(ctx: &mut Ctx, r: u64) -> Result<Report> {
    let mut report = Report::new("separate");
    let x = ctx.space()?;
    let classes = x.greedy_separation(r).classes();
    let close = classes.iter().find_map(|c| {
        c.iter().enumerate().find_map(|(k, &a)| c[k + 1..].iter().find(|&&b| x.d(a, b) <= r).map(|&b| (a, b)))
    });
    report.verdict("separated", close.is_none(), || pair(&x, close.unwrap()));
    report.measure("colours", classes.len());
    report.measure("classes", classes.iter().map(|c| ids(&x, c)).collect::<Vec<_>>());
    Ok(report)
}

fn group_validate(ctx: &mut Ctx, path: &Path) -> Result<Report> {
    let mut report = Report::new("group validate");
    let text = ctx.read("group", path)?;
    match FiniteGroup::from_json(&text) {
        Ok(g) => {
            report.verdict("group", true, || unreachable!());
            report.measure("order", g.order());
            let gens: Vec<&str> = g.generators().iter().map(|&s| g.elements()[s].as_str()).collect();
            report.measure("generators", gens);
            report.measure("diameter", g.lengths().into_iter().max().unwrap_or(0));
        }
        Err(e @ (Error::Json(_) | Error::Schema(_))) => return Err(e.into()),
        Err(e) => report.fail("group", json!({ "error": e.to_string() })),
    }
    Ok(report)
}

fn group_metric(ctx: &mut Ctx, path: &Path, emit: &Option<PathBuf>) -> Result<Report> {
    let mut report = Report::new("group metric");
    let g = ctx.group(path)?;
    let w = g.word_metric();
    report.measure("points", w.len());
    report.measure("diameter", w.diameter());
    write_doc(emit, &w.to_doc())?;
    Ok(report)
}

/// `phi[x]` for every point of `space`, from a map document naming each
/// point once.
fn map_on_space(
    doc: &MapDoc,
    space: &FiniteMetricSpace,
    value_index: impl Fn(&str) -> transatlas::Result<usize>,
) -> Result<Vec<usize>> {
    if doc.domain.len() != doc.values.len() {
        bail!("map has {} domain points and {} values", doc.domain.len(), doc.values.len());
    }
    let mut phi = vec![None; space.len()];
    for (id, v) in doc.domain.iter().zip(&doc.values) {
        let x = space.index_of(id)?;
        if phi[x].replace(value_index(v)?).is_some() {
            bail!("map lists `{id}` twice");
        }
    }
    phi.into_iter()
        .enumerate()
        .map(|(x, v)| v.ok_or_else(|| anyhow!("map misses `{}`", space.id(x))))
        .collect()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MapInput {
    Family(MapFamilyDoc),
    Single(MapDoc),
}

impl MapInput {
    fn single(self) -> Result<MapDoc> {
        match self {
            MapInput::Single(m) => Ok(m),
            MapInput::Family(mut f) if f.maps.len() == 1 => Ok(f.maps.remove(0)),
            MapInput::Family(f) => bail!("expected one map, found {}", f.maps.len()),
        }
    }
}

fn atlas_build(
    ctx: &mut Ctx,
    method: Method,
    radii: &[u64],
    group: Option<&Path>,
    map: Option<&Path>,
    emit: &Option<PathBuf>,
) -> Result<Report> {
    let mut report = Report::new("atlas build");
    let need_group = || group.ok_or_else(|| anyhow!("--group is required for this method"));
    let (space, atlas) = match method {
        Method::Coloring => {
            let x = ctx.space()?;
            let atlas = build_atlas_coloring(&x, radii)?;
            (x, atlas)
        }
        Method::Canonical => {
            let g = ctx.group(need_group()?)?;
            (g.word_metric(), canonical_atlas(&g, radii)?)
        }
        Method::Pullback => {
            let x = ctx.space()?;
            let g = ctx.group(need_group()?)?;
            let map = map.ok_or_else(|| anyhow!("--map is required for the pullback method"))?;
            let doc = ctx.doc::<MapInput>("map", map)?.single()?;
            let phi = map_on_space(&doc, &x, |v| g.index_of(v))?;
            let Some(atlas) = finding(&mut report, "injective", pullback_atlas(&x, &g, &phi, radii))? else {
                return Ok(report);
            };
            (x, atlas)
        }
    };
    atlas_verdicts(&mut report, &space, &atlas)?;
    if let Some(p) = emit {
        std::fs::write(p, atlas.to_json() + "\n").with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(report)
}

fn atlas_verdicts(report: &mut Report, x: &FiniteMetricSpace, atlas: &Atlas) -> Result<()> {
    let rep = verify_atlas(x, atlas)?;
    let mut charts = Vec::new();
    for c in &rep.charts {
        let r = c.radius;
        report.verdict(format!("R={r} axiom1"), c.axiom1, || pair(x, c.uncovered.unwrap()));
        report.verdict(format!("R={r} cotranslations"), c.cotranslations_valid, || json!(c.bad_cotranslation));
        report.verdict(format!("R={r} axiom3"), c.axiom3, || {
            let (a, b) = c.axiom3_witness.unwrap();
            json!([pair(x, a), pair(x, b)])
        });
        charts.push(json!({
            "R": r,
            "k": c.k,
            "translations": c.translations,
            "cotranslations": c.cotranslations,
            "max_displacement": c.max_displacement,
            "free": c.free,
            "globally_controlled": c.globally_controlled,
            "control_witness": c.control_witness.map(|p| pair(x, p)),
        }));
    }
    report.measure("charts", charts);
    Ok(())
}

fn atlas_verify(ctx: &mut Ctx, path: &Path) -> Result<Report> {
    let mut report = Report::new("atlas verify");
    let x = ctx.space()?;
    let text = ctx.read("atlas", path)?;
    let atlas = Atlas::from_json(&text).with_context(|| format!("malformed --atlas document {}", path.display()))?;
    atlas_verdicts(&mut report, &x, &atlas)?;
    Ok(report)
}

fn kappa(ctx: &mut Ctx, r: u64, exact: bool, max_nodes: Option<u64>, emit: &Option<PathBuf>) -> Result<Report> {
    let mut report = Report::new("kappa");
    let x = ctx.space()?;
    let mut caps = SearchCaps::default();
    if let Some(m) = max_nodes {
        caps.max_nodes = m;
    }
    let Some(outcome) = finding(&mut report, "search", kappa_search(&x, r, &caps, exact))? else {
        return Ok(report);
    };
    report.verdict("search", true, || unreachable!());
    report.measure("R", r);
    match &outcome {
        KappaOutcome::Exact { k, nodes, .. } => {
            report.measure("k", k);
            report.measure("nodes", nodes);
        }
        KappaOutcome::Bounds { lower, upper, .. } => {
            report.measure("lower", lower);
            report.measure("upper", upper);
        }
    }
    if let Some(p) = emit {
        let atlas = Atlas::new(vec![outcome.witness().clone()]);
        std::fs::write(p, atlas.to_json() + "\n").with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(report)
}

fn psd_verdict(report: &mut Report, name: &str, k: &Kernel) -> Result<Option<f64>> {
    let Some(psd) = finding(report, name, positive_type_check(k))? else { return Ok(None) };
    report.verdict(name, psd.positive, || json!({ "least_eigenvalue": psd.least_eigenvalue }));
    Ok(Some(psd.least_eigenvalue))
}

fn roe(ctx: &mut Ctx, cmd: RoeCmd) -> Result<Report> {
    match cmd {
        RoeCmd::Propagation { kernel, max } => {
            let mut report = Report::new("roe propagation");
            let x = ctx.space()?;
            let t = ctx.kernel("kernel", &kernel)?;
            let p = propagation(&x, &t)?;
            report.measure("propagation", p);
            if let Some(m) = max {
                report.verdict("propagation", p <= m, || json!({ "propagation": p, "max": m }));
            }
            Ok(report)
        }
        RoeCmd::Psd { kernel } => {
            let mut report = Report::new("roe psd");
            let u = ctx.kernel("kernel", &kernel)?;
            if let Some(least) = psd_verdict(&mut report, "positive", &u)? {
                report.measure("least_eigenvalue", least);
            }
            Ok(report)
        }
        RoeCmd::Schur { kernel, operator, emit } => {
            let mut report = Report::new("roe schur");
            let u = ctx.kernel("kernel", &kernel)?;
            let t = ctx.kernel("operator", &operator)?;
            let product = schur_multiply(&u, &t)?;
            let both = positive_type_check(&u).is_ok_and(|p| p.positive)
                && positive_type_check(&t).is_ok_and(|p| p.positive);
            report.measure("inputs_positive", both);
            if both {
                if let Some(least) = psd_verdict(&mut report, "product positive", &product)? {
                    report.measure("least_eigenvalue", least);
                }
            }
            // |(T − u∘T)_xy| <= eps |T_xy| with eps the largest |1 − u| on the support of T
            let n = t.dim();
            let support: Vec<(Point, Point)> =
                (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).filter(|&(a, b)| t.get(a, b).norm() > ctx.tol).collect();
            let one = C64::new(1.0, 0.0);
            let eps = support.iter().map(|&(a, b)| (one - u.get(a, b)).norm()).fold(0.0, f64::max);
            let excess = support.iter().find(|&&(a, b)| {
                (t.get(a, b) - product.get(a, b)).norm() > eps * t.get(a, b).norm() + ctx.tol
            });
            report.verdict("entrywise", excess.is_none(), || json!(excess.unwrap()));
            report.measure("eps", eps);
            write_doc(&emit, &product.to_doc(&ctx.space_ref()))?;
            Ok(report)
        }
        RoeCmd::AlgebraDim { kernel, group, cap, expect } => {
            let mut report = Report::new("roe algebra-dim");
            let mut gens = Vec::new();
            for (k, path) in kernel.iter().enumerate() {
                gens.push(ctx.kernel(&format!("kernel{k}"), path)?);
            }
            if let Some(g) = group {
                let g = ctx.group(&g)?;
                gens.extend(
                    g.generators().iter().map(|&s| translation_isometry(&canonical_translation(&g, s), g.order())),
                );
            }
            if gens.is_empty() {
                bail!("give --kernel or --group");
            }
            let n = gens[0].dim();
            let Some(dim) = finding(&mut report, "dimension", algebra_dimension(&gens, cap.unwrap_or(n * n), ctx.tol))?
            else {
                return Ok(report);
            };
            report.measure("dimension", dim);
            report.measure("generators", gens.len());
            if let Some(e) = expect {
                report.verdict("dimension", dim == e, || json!({ "dimension": dim, "expected": e }));
            }
            Ok(report)
        }
        RoeCmd::Claim { atlas, r } => {
            let mut report = Report::new("roe claim");
            let x = ctx.space()?;
            let text = ctx.read("atlas", &atlas)?;
            let atlas = Atlas::from_json(&text).context("malformed --atlas document")?;
            let chart = atlas.chart(r).ok_or_else(|| anyhow!("the atlas has no chart at R = {r}"))?;
            let Some(rep) = finding(&mut report, "chart", claim_matrix(&x, chart, ctx.tol))? else {
                return Ok(report);
            };
            report.verdict("positive", rep.psd, || json!({ "least_eigenvalue": rep.least_eigenvalue }));
            report.verdict("unit entries", rep.entry_witness.is_none(), || pair(&x, rep.entry_witness.unwrap()));
            report.verdict("fibers", rep.fiber_witness.is_none(), || pair(&x, rep.fiber_witness.unwrap()));
            report.measure("least_eigenvalue", rep.least_eigenvalue);
            report.measure("distinct_blocks", rep.distinct_blocks);
            Ok(report)
        }
    }
}

fn conversion_verdicts(report: &mut Report, conv: &Conversion) {
    let mut bounds = BTreeMap::new();
    for c in &conv.checks {
        report.verdict(c.name, c.holds, || json!({ "measured": c.measured, "bound": c.bound }));
        bounds.insert(c.name, json!({ "measured": c.measured, "bound": c.bound }));
    }
    report.measure("bounds", bounds);
}

fn propa(ctx: &mut Ctx, cmd: PropaCmd) -> Result<Report> {
    match cmd {
        PropaCmd::Verify { cert } => {
            let mut report = Report::new("propa verify");
            let x = ctx.space()?;
            let text = ctx.read("cert", &cert)?;
            let cert = PropACertificate::from_json(&text, &x, ctx.tol)?;
            let rep = verify_certificate(&cert, &x, ctx.tol)?;
            report.measure("variant", cert.variant.name());
            let mut values = BTreeMap::new();
            for c in &rep.checks {
                report.verdict(c.name, c.pass, || {
                    json!({ "value": c.value, "points": c.witness.as_deref().map(|w| ids(&x, w)) })
                });
                values.insert(c.name, c.value);
            }
            report.measure("values", values);
            Ok(report)
        }
        PropaCmd::Convert { input, from, to, s, emit } => {
            let mut report = Report::new("propa convert");
            let x = ctx.space()?;
            let text = ctx.read("in", &input)?;
            let cert = PropACertificate::from_json(&text, &x, ctx.tol)?;
            if let Some(f) = from {
                let f = Variant::parse(&f)?;
                if f != cert.variant {
                    bail!("--from {f} but the certificate is {}", cert.variant);
                }
            }
            let to = Variant::parse(&to)?;
            use Variant::*;
            let conv = match (cert.variant, to) {
                (YuSets, L1) => yusets_to_l1(&cert, &x, ctx.tol),
                (L1, L2) => l1_to_l2(&cert, &x, ctx.tol),
                (L2DeltaWeak, L2Delta) => truncate_normalize(&cert, &x, ctx.tol),
                (L2 | Hilbert, KernelReal) => vectors_to_kernel(&cert, &x, ctx.tol),
                (KernelReal | KernelRoe, L2) => {
                    let s = s.ok_or_else(|| anyhow!("--S is required to turn a kernel into vectors"))?;
                    kernel_to_vectors(&cert, &x, s, ctx.tol)
                }
                (a, b) => bail!("no conversion from {a} to {b}"),
            };
            let Some(conv) = finding(&mut report, "precondition", conv)? else { return Ok(report) };
            conversion_verdicts(&mut report, &conv);
            report.measure("from", cert.variant.name());
            report.measure("to", conv.cert.variant.name());
            report.measure("params", conv.cert.params);
            if let Some(p) = &emit {
                std::fs::write(p, conv.cert.to_json(&x, &ctx.space_ref()) + "\n")
                    .with_context(|| format!("cannot write {}", p.display()))?;
            }
            Ok(report)
        }
        PropaCmd::BallCert { r, s, eps, emit } => {
            let mut report = Report::new("propa ball-cert");
            let x = ctx.space()?;
            let cert = ball_certificate(&x, s, r, eps);
            let rep = verify_certificate(&cert, &x, ctx.tol)?;
            for c in &rep.checks {
                report.verdict(c.name, c.pass, || {
                    json!({ "value": c.value, "points": c.witness.as_deref().map(|w| ids(&x, w)) })
                });
            }
            report.measure("params", cert.params);
            if let Some(p) = &emit {
                std::fs::write(p, cert.to_json(&x, &ctx.space_ref()) + "\n")
                    .with_context(|| format!("cannot write {}", p.display()))?;
            }
            Ok(report)
        }
    }
}

fn telescope_build(ctx: &mut Ctx, levels: u64, emit: &Option<PathBuf>) -> Result<Report> {
    let mut report = Report::new("telescope build");
    let x = ctx.space()?;
    let g = telescope_graph(&x, levels);
    report.measure("vertices", g.len());
    report.measure("edges", g.edges().len());
    report.measure("max_degree", g.max_degree());
    report.measure("degree_histogram", g.degree_histogram());
    write_doc(emit, &g.to_doc(&x))?;
    Ok(report)
}

fn telescope_verify(ctx: &mut Ctx, graph: &Path, r: u64) -> Result<Report> {
    let mut report = Report::new("telescope check");
    let x = ctx.space()?;
    let doc: GraphDoc = ctx.doc("graph", graph)?;
    let g = TelescopeGraph::from_doc(&doc, &x)?;
    let Some(rep) = finding(&mut report, "depth", telescope_check(&x, &g, r))? else { return Ok(report) };
    report.verdict("degree", rep.degree_ok, || json!({ "max_degree": rep.max_degree }));
    report.verdict("forward", rep.forward_witness.is_none(), || {
        json!({ "points": pair(&x, rep.forward_witness.unwrap()), "distance": rep.forward_worst })
    });
    report.verdict("backward", rep.backward_witness.is_none(), || {
        json!({ "points": pair(&x, rep.backward_witness.unwrap()), "distance": rep.backward_worst })
    });
    report.measure("level", rep.level);
    report.measure("ball_bound", rep.ball_bound);
    report.measure("max_degree", rep.max_degree);
    report.measure("forward_bound", rep.forward_bound);
    report.measure("forward_worst", rep.forward_worst);
    report.measure("backward_bound", rep.backward_bound);
    report.measure("backward_worst", rep.backward_worst);
    Ok(report)
}

fn gammau(_ctx: &mut Ctx, n_max: usize, emit: &Option<PathBuf>) -> Result<Report> {
    let mut report = Report::new("gammau");
    let g = gamma_u(n_max)?;
    let mut by_size = BTreeMap::new();
    for c in &g.components {
        *by_size.entry(c.graph.order().to_string()).or_insert(0usize) += 1;
    }
    report.measure("components", g.components.len());
    report.measure("components_by_order", by_size);
    report.measure("points", g.space.len());
    write_doc(emit, &g.space.to_doc())?;
    Ok(report)
}

/// The surjection onto `y` and the domain ids in point order.
fn load_surjection(
    ctx: &mut Ctx,
    map: &Path,
    source: Option<&FiniteMetricSpace>,
    y: &FiniteMetricSpace,
    report: &mut Report,
) -> Result<Option<(Surjection, Vec<String>)>> {
    let doc = ctx.doc::<MapInput>("map", map)?.single()?;
    let (f, domain) = match source {
        Some(x) => (map_on_space(&doc, x, |v| y.index_of(v))?, x.ids().to_vec()),
        None => {
            if doc.domain.len() != doc.values.len() {
                bail!("map has {} domain points and {} values", doc.domain.len(), doc.values.len());
            }
            let f = doc.values.iter().map(|v| y.index_of(v)).collect::<transatlas::Result<Vec<_>>>()?;
            (f, doc.domain.clone())
        }
    };
    Ok(finding(report, "surjective", Surjection::new(f, y))?.map(|s| (s, domain)))
}

fn morita_interleave_cmd(ctx: &mut Ctx, map: &Path, source: Option<&Path>, window: i64) -> Result<Report> {
    let mut report = Report::new("morita interleave");
    let y = ctx.space()?;
    let x = source.map(|p| ctx.load_space("source", p)).transpose()?;
    let Some((f, domain)) = load_surjection(ctx, map, x.as_ref(), &y, &mut report)? else { return Ok(report) };
    let rep = morita_interleave(&f, window)?;
    let slot = |(p, j): (Point, i64)| json!([domain[p], j]);
    report.verdict("injective", rep.injective, || {
        let (a, b) = rep.collision.unwrap();
        json!([slot(a), slot(b)])
    });
    report.verdict("image", rep.image_exact, || {
        let (p, k) = rep.image_witness.unwrap();
        json!([y.id(p), k])
    });
    let ranges: Vec<Value> = rep.ranges.iter().map(|&(p, lo, hi)| json!([y.id(p), lo, hi])).collect();
    report.measure("ranges", ranges);
    report.measure("slots", rep.mapping.len());
    Ok(report)
}

fn morita_conjugate_cmd(
    ctx: &mut Ctx,
    map: &Path,
    source: &Path,
    kernel: &Path,
    rows: (usize, usize),
    cols: (usize, usize),
) -> Result<Report> {
    let mut report = Report::new("morita conjugate");
    let y = ctx.space()?;
    let x = ctx.load_space("source", source)?;
    let Some((f, _)) = load_surjection(ctx, map, Some(&x), &y, &mut report)? else { return Ok(report) };
    let t = ctx.kernel("kernel", kernel)?;
    let rep = morita_conjugation_check(&f, &x, &y, &t, rows, cols)?;
    report.verdict("propagation", rep.holds, || json!({ "propagation": rep.propagation, "bound": rep.bound }));
    report.measure("rows", ids(&x, &rep.rows));
    report.measure("cols", ids(&x, &rep.cols));
    report.measure("source_propagation", rep.source_propagation);
    report.measure("propagation", rep.propagation);
    report.measure("control_bound", rep.control_bound);
    report.measure("fibre_radius", rep.fibre_radius);
    report.measure("bound", rep.bound);
    Ok(report)
}

fn limit_embed(ctx: &mut Ctx, group: &Path, maps: &Path, min_tail: usize) -> Result<Report> {
    let mut report = Report::new("limit-embed");
    let g = ctx.group(group)?;
    let doc: MapFamilyDoc = ctx.doc("maps", maps)?;
    let family = doc.maps.iter().map(|m| PointMap::from_doc(m, &g)).collect::<transatlas::Result<Vec<_>>>()?;
    let emb = match limit_embedding(&g, &family, min_tail) {
        Ok(e) => e,
        Err(Error::NotStabilizing(a, b)) => {
            report.fail("stable", json!([a, b]));
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    report.verdict("stable", true, || unreachable!());
    report.verdict("unit", emb.unit, || json!(emb.points.iter().find(|_| true)));
    report.verdict("inverse", emb.inverse, || {
        let n = emb.points.len();
        let bad = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).find(|&(a, b)| emb.g[b][a] != g.inv(emb.g[a][b]));
        json!(bad.map(|(a, b)| [&emb.points[a], &emb.points[b]]))
    });
    report.verdict("cocycle", emb.cocycle, || {
        let (a, b, c) = emb.cocycle_witness.unwrap();
        json!([emb.points[a], emb.points[b], emb.points[c]])
    });
    report.verdict("isometric", emb.isometric, || json!("word lengths of ψ differ from the limit"));
    let psi: BTreeMap<&str, &str> =
        emb.points.iter().zip(&emb.psi).map(|(p, &e)| (p.as_str(), g.elements()[e].as_str())).collect();
    report.measure("psi", psi);
    report.measure("maps", family.len());
    Ok(report)
}

fn glue(ctx: &mut Ctx, blocks: &Path, r: u64, eps: f64, emit: &Option<PathBuf>) -> Result<Report> {
    let mut report = Report::new("glue");
    let x = ctx.space()?;
    let doc: GlueDoc = ctx.doc("blocks", blocks)?;
    let blocks = doc.to_blocks(&x, ctx.tol)?;
    let Some(rep) = finding(&mut report, "blocks", glue_local_kernel(&x, &blocks, r, eps, ctx.tol))? else {
        return Ok(report);
    };
    report.verdict("positive", rep.positive.positive, || json!({ "least_eigenvalue": rep.positive.least_eigenvalue }));
    report.verdict("variation", rep.variation.holds, || {
        json!({ "points": pair(&x, rep.variation.witness.unwrap()), "worst": rep.variation.worst })
    });
    report.verdict("propagation", rep.propagation <= rep.propagation_bound, || {
        json!({ "propagation": rep.propagation, "bound": rep.propagation_bound })
    });
    report.measure("fused_blocks", rep.fused.len());
    report.measure("least_eigenvalue", rep.positive.least_eigenvalue);
    report.measure("worst_variation", rep.variation.worst);
    report.measure("propagation", rep.propagation);
    write_doc(emit, &rep.kernel.to_doc(&ctx.space_ref()))?;
    Ok(report)
}
