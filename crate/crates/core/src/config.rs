//! Run configuration.
//!
//! A run is described by a TOML document:
//!
//! ```toml
//! label = "all-sram"
//! seed = 1
//! cores = 1
//!
//! [trace]
//! kind = "loop"              # loop | random | stream | file
//! working_set = "12MiB"
//! iterations = 16
//!
//! [levels.llc]
//! tech = "hybrid"            # sram | gc | edram | sttram | hybrid
//! capacity = "24MiB"
//! ways = 24
//! gc_ways = 8
//! stt_ways = 16
//! ```
//!
//! Omitted levels default to SRAM with 32 KiB / 8-way L1s, a 256 KiB / 8-way
//! L2 and an 8 MiB / 16-way LLC. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::catalog::{CacheLevel, Catalog, Node, TechClass, TechParams};
use crate::energy::LevelKind;
use crate::error::{Error, Result};
use crate::geometry::CacheGeometry;
use crate::refresh::{RetentionBin, RetentionBins};
use crate::trace::{GenKind, GenParams};
use crate::units::{parse_fixed, parse_ppm, parse_size};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LevelTech {
    Uniform(TechClass),
    /// GC ways `0..gc_ways` followed by STT-RAM ways.
    Hybrid { gc_ways: u16, stt_ways: u16 },
}

impl LevelTech {
    pub fn has_gc_ways(self) -> bool {
        matches!(self, LevelTech::Uniform(TechClass::Gc) | LevelTech::Hybrid { .. })
    }

    pub fn has_dynamic_ways(self) -> bool {
        match self {
            LevelTech::Uniform(t) => t.is_dynamic(),
            LevelTech::Hybrid { .. } => true,
        }
    }

    pub fn name(self) -> String {
        match self {
            LevelTech::Uniform(t) => t.name().to_string(),
            LevelTech::Hybrid { gc_ways, stt_ways } => format!("GC{gc_ways}+STTRAM{stt_ways}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSpec {
    pub tech: LevelTech,
    pub geometry: CacheGeometry,
    pub node: Node,
    pub nrp: bool,
    pub nrp_counter_bits: u8,
    pub nrp_read_resets: bool,
    pub asymmetric_writes: bool,
    /// Fallback fraction of unchanged bits, in ppm, for writes without a
    /// payload.
    pub write_similarity_ppm: Option<u32>,
    pub compare_victim_on_fill: bool,
    pub overlap: bool,
    /// Defaults to the write latency in cycles.
    pub overlap_window_cycles: Option<u32>,
    pub synchronized_subarrays: bool,
    pub hybrid_promote_mru: bool,
    pub refresh_interval_multiplier: u32,
    pub bins: Option<RetentionBins>,
}

impl LevelSpec {
    pub fn new(tech: LevelTech, capacity_bytes: u64, ways: u32) -> Result<LevelSpec> {
        Ok(LevelSpec {
            tech,
            geometry: CacheGeometry::new(capacity_bytes, ways)?,
            node: Node::Nm28,
            nrp: false,
            nrp_counter_bits: 5,
            nrp_read_resets: false,
            asymmetric_writes: false,
            write_similarity_ppm: Some(DEFAULT_SIMILARITY_PPM),
            compare_victim_on_fill: false,
            overlap: false,
            overlap_window_cycles: None,
            synchronized_subarrays: true,
            hybrid_promote_mru: false,
            refresh_interval_multiplier: 1,
            bins: None,
        })
    }

    pub fn uniform(tech: TechClass, capacity_bytes: u64, ways: u32) -> Result<LevelSpec> {
        LevelSpec::new(LevelTech::Uniform(tech), capacity_bytes, ways)
    }

    /// Saturation value of the NRP counter.
    pub fn nrp_threshold(&self) -> u8 {
        ((1u16 << self.nrp_counter_bits) - 1) as u8
    }

    /// Array constants at this level's node and the given clock: the main
    /// (or GC) side and, for hybrids, the STT-RAM side.
    pub fn params(&self, kind: LevelKind, catalog: &Catalog, clock_mhz: u32) -> Result<(TechParams, Option<TechParams>)> {
        let level = catalog_level(kind);
        let fix = |p: TechParams| crate::catalog::scale(&p, Node::Nm28, self.node).at_clock(clock_mhz);
        match self.tech {
            LevelTech::Uniform(t) => Ok((fix(catalog.params(level, t)?), None)),
            LevelTech::Hybrid { .. } => Ok((
                fix(catalog.hybrid_params(TechClass::Gc)?),
                Some(fix(catalog.hybrid_params(TechClass::SttRam)?)),
            )),
        }
    }

    fn validate(&self, kind: LevelKind, catalog: &Catalog) -> Result<()> {
        let field = |f: &str| format!("levels.{kind}.{f}");
        if let LevelTech::Hybrid { gc_ways, stt_ways } = self.tech {
            if kind != LevelKind::Llc {
                return Err(Error::Config(format!("{}: a GC/STT-RAM hybrid is only supported at the LLC", field("tech"))));
            }
            if gc_ways == 0 || stt_ways == 0 || (gc_ways + stt_ways) as u32 != self.geometry.associativity() {
                return Err(Error::Config(format!(
                    "{}: gc_ways ({gc_ways}) + stt_ways ({stt_ways}) must equal ways ({}) and both be positive",
                    field("gc_ways"),
                    self.geometry.associativity()
                )));
            }
        }
        self.params(kind, catalog, catalog.clock_mhz())
            .map_err(|e| Error::Config(format!("{} = {:?}: {e}", field("tech"), self.tech.name().to_lowercase())))?;
        if self.nrp && !self.tech.has_dynamic_ways() {
            return Err(Error::Config(format!("{}: NRP needs a technology with a retention time", field("nrp"))));
        }
        if !(1..=8).contains(&self.nrp_counter_bits) {
            return Err(Error::Config(format!("{}: must be between 1 and 8", field("nrp_counter_bits"))));
        }
        if self.asymmetric_writes && !self.tech.has_gc_ways() {
            return Err(Error::Config(format!(
                "{}: asymmetric writes need decoupled-bitline (GC) ways",
                field("asymmetric_writes")
            )));
        }
        if self.overlap && !self.tech.has_gc_ways() {
            return Err(Error::Config(format!("{}: write/read overlap needs GC ways", field("overlap"))));
        }
        if self.bins.is_some() && (!self.tech.has_dynamic_ways() || self.nrp) {
            return Err(Error::Config(format!("{}: retention bins need a refreshed technology", field("bins"))));
        }
        if self.refresh_interval_multiplier == 0 {
            return Err(Error::Config(format!("{}: must be at least 1", field("refresh_interval_multiplier"))));
        }
        if self.overlap_window_cycles == Some(0) {
            return Err(Error::Config(format!("{}: must be at least 1", field("overlap_window_cycles"))));
        }
        Ok(())
    }
}

/// Fraction of unchanged bits assumed for payload-less writes, in ppm.
pub const DEFAULT_SIMILARITY_PPM: u32 = 760_000;
/// The L1D sees more repeated data than the other levels.
pub const L1D_SIMILARITY_PPM: u32 = 940_000;

pub fn default_similarity_ppm(kind: LevelKind) -> u32 {
    match kind {
        LevelKind::L1D => L1D_SIMILARITY_PPM,
        _ => DEFAULT_SIMILARITY_PPM,
    }
}

pub fn catalog_level(kind: LevelKind) -> CacheLevel {
    match kind {
        LevelKind::L1I | LevelKind::L1D => CacheLevel::L1,
        LevelKind::L2 => CacheLevel::L2,
        LevelKind::Llc => CacheLevel::Llc,
    }
}

/// Private L1I/L1D/L2 per core and a shared LLC.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyConfig {
    pub cores: u32,
    pub clock_mhz: u32,
    /// Indexed by [`LevelKind::index`].
    pub levels: [LevelSpec; 4],
    /// Seed for retention-bin row assignment.
    pub seed: u64,
}

impl HierarchyConfig {
    /// 32 KiB / 8-way L1s, 256 KiB / 8-way L2 and 8 MiB / 16-way LLC, all of
    /// `tech`.
    pub fn uniform(tech: TechClass, cores: u32) -> HierarchyConfig {
        let mut l1d = LevelSpec::uniform(tech, 32 << 10, 8).unwrap();
        l1d.write_similarity_ppm = Some(L1D_SIMILARITY_PPM);
        HierarchyConfig {
            cores,
            clock_mhz: Catalog::builtin().clock_mhz(),
            levels: [
                LevelSpec::uniform(tech, 32 << 10, 8).unwrap(),
                l1d,
                LevelSpec::uniform(tech, 256 << 10, 8).unwrap(),
                LevelSpec::uniform(tech, 8 << 20, 16).unwrap(),
            ],
            seed: 0,
        }
    }

    pub fn all_sram(cores: u32) -> HierarchyConfig {
        HierarchyConfig::uniform(TechClass::Sram, cores)
    }

    pub fn level(&self, kind: LevelKind) -> &LevelSpec {
        &self.levels[kind.index()]
    }

    pub fn level_mut(&mut self, kind: LevelKind) -> &mut LevelSpec {
        &mut self.levels[kind.index()]
    }

    pub fn with_level(mut self, kind: LevelKind, spec: LevelSpec) -> HierarchyConfig {
        self.levels[kind.index()] = spec;
        self
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        if self.cores == 0 {
            return Err(Error::Config("cores: must be at least 1".into()));
        }
        if self.clock_mhz == 0 {
            return Err(Error::Config("clock_ghz: must be positive".into()));
        }
        for kind in LevelKind::ALL {
            self.level(kind).validate(kind, catalog)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceSource {
    Generated(GenParams),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub label: String,
    pub seed: u64,
    pub hierarchy: HierarchyConfig,
    pub trace: TraceSource,
}

impl RunConfig {
    pub fn new(label: impl Into<String>, hierarchy: HierarchyConfig, trace: TraceSource) -> RunConfig {
        RunConfig { label: label.into(), seed: hierarchy.seed, hierarchy, trace }
    }

    /// Replaces the seed of the generator and of the bin assignment.
    pub fn with_seed(mut self, seed: u64) -> RunConfig {
        self.seed = seed;
        self.hierarchy.seed = seed;
        if let TraceSource::Generated(g) = &mut self.trace {
            g.seed = seed;
        }
        self
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml_str(&text, path.parent())
    }

    /// Parses a config. Relative trace paths are resolved against
    /// `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<RunConfig> {
        let file: RunFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.resolve(base_dir)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    label: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "one")]
    cores: u32,
    clock_ghz: Option<String>,
    node_nm: Option<u32>,
    trace: TraceSection,
    #[serde(default)]
    levels: LevelsSection,
}

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum TraceKindName {
    Loop,
    Random,
    Stream,
    File,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceSection {
    kind: TraceKindName,
    path: Option<String>,
    working_set: Option<String>,
    stride: Option<u64>,
    iterations: Option<u64>,
    count: Option<u64>,
    hot: Option<String>,
    hot_prob: Option<f64>,
    write_ratio: Option<f64>,
    gap: Option<u64>,
    data: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct LevelsSection {
    l1i: Option<LevelSection>,
    l1d: Option<LevelSection>,
    l2: Option<LevelSection>,
    llc: Option<LevelSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelSection {
    #[serde(default = "sram")]
    tech: String,
    capacity: Option<String>,
    ways: Option<u32>,
    gc_ways: Option<u16>,
    stt_ways: Option<u16>,
    node_nm: Option<u32>,
    #[serde(default)]
    nrp: bool,
    nrp_counter_bits: Option<u8>,
    #[serde(default)]
    nrp_read_resets: bool,
    #[serde(default)]
    asymmetric_writes: bool,
    write_similarity: Option<String>,
    #[serde(default)]
    compare_victim_on_fill: bool,
    #[serde(default)]
    overlap: bool,
    overlap_window_cycles: Option<u32>,
    #[serde(default = "yes")]
    synchronized_subarrays: bool,
    #[serde(default)]
    hybrid_promote_mru: bool,
    refresh_interval_multiplier: Option<u32>,
    #[serde(default)]
    bins: Vec<BinSection>,
}

fn sram() -> String {
    "sram".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BinSection {
    retention_multiplier: u32,
    fraction: String,
}

fn need<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("{field}: missing")))
}

fn size(v: &str, field: &str) -> Result<u64> {
    parse_size(v).map_err(|e| Error::Config(format!("{field}: {e}")))
}

impl TraceSection {
    fn resolve(self, seed: u64, base_dir: Option<&Path>) -> Result<TraceSource> {
        let kind = match self.kind {
            TraceKindName::File => {
                let p = PathBuf::from(need(self.path, "trace.path")?);
                let p = match base_dir {
                    Some(d) if p.is_relative() => d.join(p),
                    _ => p,
                };
                return Ok(TraceSource::File(p));
            }
            TraceKindName::Loop => GenKind::Loop {
                working_set_bytes: size(&need(self.working_set, "trace.working_set")?, "trace.working_set")?,
                stride: self.stride.unwrap_or(64),
                iterations: self.iterations.unwrap_or(1),
            },
            TraceKindName::Random => GenKind::Random {
                working_set_bytes: size(&need(self.working_set, "trace.working_set")?, "trace.working_set")?,
                count: need(self.count, "trace.count")?,
                hot_bytes: match &self.hot {
                    Some(h) => size(h, "trace.hot")?,
                    None => 0,
                },
                hot_prob: self.hot_prob.unwrap_or(0.0),
            },
            TraceKindName::Stream => GenKind::Stream {
                count: need(self.count, "trace.count")?,
                stride: self.stride.unwrap_or(64),
            },
        };
        if self.path.is_some() {
            return Err(Error::Config("trace.path: only valid with kind = \"file\"".into()));
        }
        let params = GenParams {
            kind,
            write_ratio: self.write_ratio.unwrap_or(0.0),
            gap_cycles: self.gap.unwrap_or(0),
            data: self.data.unwrap_or(false),
            seed,
        };
        params.validate().map_err(|e| Error::Config(format!("trace: {e}")))?;
        Ok(TraceSource::Generated(params))
    }
}

impl LevelSection {
    fn resolve(self, kind: LevelKind, default: &LevelSpec, node: Node) -> Result<LevelSpec> {
        let field = |f: &str| format!("levels.{kind}.{f}");
        let tech = match self.tech.to_ascii_lowercase().as_str() {
            "hybrid" => LevelTech::Hybrid {
                gc_ways: need(self.gc_ways, &field("gc_ways"))?,
                stt_ways: need(self.stt_ways, &field("stt_ways"))?,
            },
            t => {
                if self.gc_ways.is_some() || self.stt_ways.is_some() {
                    return Err(Error::Config(format!("{}: only valid with tech = \"hybrid\"", field("gc_ways"))));
                }
                LevelTech::Uniform(
                    t.parse()
                        .map_err(|e| Error::Config(format!("{}: {e}", field("tech"))))?,
                )
            }
        };
        let capacity = match &self.capacity {
            Some(c) => size(c, &field("capacity"))?,
            None => default.geometry.capacity_bytes(),
        };
        let ways = self.ways.unwrap_or(match tech {
            LevelTech::Hybrid { gc_ways, stt_ways } => (gc_ways + stt_ways) as u32,
            _ => default.geometry.associativity(),
        });
        let mut spec = LevelSpec::new(tech, capacity, ways)
            .map_err(|e| Error::Config(format!("{}: {e}", field("capacity"))))?;
        spec.node = match self.node_nm {
            Some(nm) => Node::from_nm(nm).map_err(|e| Error::Config(format!("{}: {e}", field("node_nm"))))?,
            None => node,
        };
        spec.nrp = self.nrp;
        spec.nrp_counter_bits = self.nrp_counter_bits.unwrap_or(5);
        spec.nrp_read_resets = self.nrp_read_resets;
        spec.asymmetric_writes = self.asymmetric_writes;
        spec.write_similarity_ppm = match self.write_similarity.as_deref() {
            Some("none") => None,
            Some(s) => Some(parse_ppm(s).map_err(|e| Error::Config(format!("{}: {e}", field("write_similarity"))))?),
            None => Some(default_similarity_ppm(kind)),
        };
        spec.compare_victim_on_fill = self.compare_victim_on_fill;
        spec.overlap = self.overlap;
        spec.overlap_window_cycles = self.overlap_window_cycles;
        spec.synchronized_subarrays = self.synchronized_subarrays;
        spec.hybrid_promote_mru = self.hybrid_promote_mru;
        spec.refresh_interval_multiplier = self.refresh_interval_multiplier.unwrap_or(1);
        if !self.bins.is_empty() {
            let bins = self
                .bins
                .iter()
                .map(|b| {
                    Ok(RetentionBin {
                        retention_multiplier: b.retention_multiplier,
                        fraction_ppm: parse_ppm(&b.fraction)
                            .map_err(|e| Error::Config(format!("{}: {e}", field("bins.fraction"))))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            spec.bins = Some(
                RetentionBins::new(bins).map_err(|e| Error::Config(format!("{}: {e}", field("bins"))))?,
            );
        }
        Ok(spec)
    }
}

impl RunFile {
    fn resolve(self, base_dir: Option<&Path>) -> Result<RunConfig> {
        let catalog = Catalog::from_env()?;
        let clock_mhz = match &self.clock_ghz {
            Some(g) => {
                let mhz = parse_fixed(g, 3).map_err(|e| Error::Config(format!("clock_ghz: {e}")))?;
                u32::try_from(mhz).map_err(|_| Error::Config("clock_ghz: out of range".into()))?
            }
            None => catalog.clock_mhz(),
        };
        let node = match self.node_nm {
            Some(nm) => Node::from_nm(nm).map_err(|e| Error::Config(format!("node_nm: {e}")))?,
            None => Node::Nm28,
        };
        let mut hierarchy = HierarchyConfig::all_sram(self.cores);
        hierarchy.clock_mhz = clock_mhz;
        hierarchy.seed = self.seed;
        for l in hierarchy.levels.iter_mut() {
            l.node = node;
        }
        let sections = [self.levels.l1i, self.levels.l1d, self.levels.l2, self.levels.llc];
        for (kind, section) in LevelKind::ALL.into_iter().zip(sections) {
            if let Some(s) = section {
                let spec = s.resolve(kind, hierarchy.level(kind), node)?;
                hierarchy.levels[kind.index()] = spec;
            }
        }
        hierarchy.validate(&catalog)?;
        let trace = self.trace.resolve(self.seed, base_dir)?;
        Ok(RunConfig { label: self.label, seed: self.seed, hierarchy, trace })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "label = \"t\"\n[trace]\nkind = \"loop\"\nworking_set = \"1MiB\"\n";

    #[test]
    fn defaults_are_all_sram() {
        let c = RunConfig::from_toml_str(BASE, None).unwrap();
        assert_eq!(c.hierarchy, HierarchyConfig::all_sram(1));
        assert_eq!(c.hierarchy.clock_mhz, 3400);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str(&format!("{BASE}bogus = 1\n"), None).is_err());
        let e = RunConfig::from_toml_str(&format!("{BASE}[levels.l1d]\ntech = \"gc\"\nfrobnicate = true\n"), None);
        assert!(e.is_err());
    }

    #[test]
    fn sttram_at_l1_names_the_field() {
        let e = RunConfig::from_toml_str(&format!("{BASE}[levels.l1d]\ntech = \"sttram\"\n"), None).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("levels.l1d.tech"), "{msg}");
        assert!(msg.contains("unsupported"), "{msg}");
    }

    #[test]
    fn hybrid_only_at_llc() {
        let e = RunConfig::from_toml_str(
            &format!("{BASE}[levels.l2]\ntech = \"hybrid\"\ngc_ways = 4\nstt_ways = 4\n"),
            None,
        )
        .unwrap_err();
        assert!(e.to_string().contains("levels.l2.tech"));
        let ok = RunConfig::from_toml_str(
            &format!("{BASE}[levels.llc]\ntech = \"hybrid\"\ncapacity = \"24MiB\"\ngc_ways = 8\nstt_ways = 16\n"),
            None,
        )
        .unwrap();
        assert_eq!(ok.hierarchy.level(LevelKind::Llc).geometry.associativity(), 24);
    }

    #[test]
    fn nrp_needs_dynamic_tech() {
        let e = RunConfig::from_toml_str(&format!("{BASE}[levels.l1d]\nnrp = true\n"), None).unwrap_err();
        assert!(e.to_string().contains("levels.l1d.nrp"));
        assert!(RunConfig::from_toml_str(&format!("{BASE}[levels.l1d]\ntech = \"gc\"\nnrp = true\n"), None).is_ok());
    }

    #[test]
    fn asymmetric_needs_gc() {
        let e = RunConfig::from_toml_str(
            &format!("{BASE}[levels.llc]\ntech = \"edram\"\nasymmetric_writes = true\n"),
            None,
        )
        .unwrap_err();
        assert!(e.to_string().contains("asymmetric_writes"));
    }

    #[test]
    fn bins_and_trace_kinds() {
        let c = RunConfig::from_toml_str(
            "label = \"b\"\nseed = 7\n[trace]\nkind = \"file\"\npath = \"x.trace\"\n[levels.l2]\ntech = \"gc\"\n\
             [[levels.l2.bins]]\nretention_multiplier = 1\nfraction = \"0.5\"\n\
             [[levels.l2.bins]]\nretention_multiplier = 2\nfraction = \"0.5\"\n",
            Some(Path::new("/tmp/cfg")),
        )
        .unwrap();
        assert_eq!(c.trace, TraceSource::File(PathBuf::from("/tmp/cfg/x.trace")));
        assert_eq!(c.hierarchy.level(LevelKind::L2).bins.as_ref().unwrap().bins().len(), 2);
        let bad = "label = \"b\"\n[trace]\nkind = \"file\"\npath = \"x\"\n[levels.l2]\ntech = \"gc\"\n\
                   [[levels.l2.bins]]\nretention_multiplier = 1\nfraction = \"0.4\"\n";
        assert!(RunConfig::from_toml_str(bad, None).is_err());
    }

    #[test]
    fn seed_override_reaches_generator() {
        let c = RunConfig::from_toml_str(BASE, None).unwrap().with_seed(99);
        match c.trace {
            TraceSource::Generated(g) => assert_eq!(g.seed, 99),
            _ => unreachable!(),
        }
        assert_eq!(c.hierarchy.seed, 99);
    }

    #[test]
    fn node_scaling_applies() {
        let c = RunConfig::from_toml_str(&format!("node_nm = 7\n{BASE}[levels.l1d]\ntech = \"gc\"\n"), None).unwrap();
        let l1d = c.hierarchy.level(LevelKind::L1D);
        let (p, _) = l1d.params(LevelKind::L1D, Catalog::builtin(), 3400).unwrap();
        assert_eq!(p.read_aj_per_bit, 410_000 / 16);
    }
}
