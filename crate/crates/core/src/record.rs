//! One-pair analysis pipeline, flat result records and the parallel range scan.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::odd_primes_below;
use crate::error::{Error, Result};
use crate::triquad::{
    classify, type22_check, unit_group, BitState, Classification, EngineConfig, Resolved, Structure,
    UnitGroupReport,
};

/// Classification plus, for supported pairs, the unit-group report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analysis {
    pub classification: Classification,
    pub report: Option<UnitGroupReport>,
    pub type22: bool,
}

impl Analysis {
    pub fn is_supported(&self) -> bool {
        self.report.is_some()
    }

    /// All α bits decided.
    pub fn is_resolved(&self) -> bool {
        self.report.as_ref().map_or(true, |r| r.all_bits_resolved())
    }

    /// Every cross-check held (Kuroda, stated q(K), Eq. (3.2), Theorem 4.1).
    pub fn is_consistent(&self) -> bool {
        self.report
            .as_ref()
            .map_or(true, |r| r.kuroda_consistent && r.k5_identity != Some(false))
    }
}

pub fn analyze(p: u64, q: u64, cfg: &EngineConfig) -> Result<Analysis> {
    let classification = classify(p, q)?;
    if !classification.theorem.is_supported() {
        return Ok(Analysis {
            classification,
            report: None,
            type22: false,
        });
    }
    let report = unit_group(&classification, cfg)?;
    let type22 = type22_check(&classification, &report);
    Ok(Analysis {
        classification,
        report: Some(report),
        type22,
    })
}

/// Flat, serialization-stable record; every integer is a decimal string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub p: String,
    pub q: String,
    pub p_mod8: String,
    pub q_mod8: String,
    pub legendre_pq: String,
    pub norm_eps_2p: Option<String>,
    pub x_case: Option<String>,
    pub v_case: Option<String>,
    pub u_sign: Option<String>,
    pub theorem: String,
    pub nearest_theorem: Option<String>,
    /// Radicand value → h₂ of Q(√m).
    pub subfield_h2: BTreeMap<String, String>,
    pub generators: Vec<String>,
    /// A decimal string, or candidates joined by `|` when bits are unresolved.
    pub q_index: Option<String>,
    pub q_index_stated: Option<String>,
    pub h2_k: Option<String>,
    pub h2_k_resolved: bool,
    pub kuroda_h2: Option<String>,
    pub kuroda_consistent: Option<bool>,
    pub k5_identity: Option<bool>,
    pub structure: Option<String>,
    pub type22: bool,
    pub alpha_flags: BTreeMap<String, String>,
    pub certificate_notes: Vec<String>,
    pub notes: Vec<String>,
    pub denom_bound: String,
    pub max_precision_bits: String,
    pub exact_fallback: bool,
    /// Present for single queries only, so scans stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<String>,
}

fn resolved_string(r: &Resolved<u64>) -> String {
    match r {
        Resolved::Exact(v) => v.to_string(),
        Resolved::Candidates(vs) => vs.iter().map(u64::to_string).collect::<Vec<_>>().join("|"),
    }
}

fn bit_string(b: BitState) -> String {
    b.value().map_or_else(|| "unresolved".to_string(), |v| v.to_string())
}

impl ResultRecord {
    pub fn from_analysis(a: &Analysis, cfg: &EngineConfig) -> ResultRecord {
        let c = &a.classification;
        let r = a.report.as_ref();
        let (p, q) = (c.p, c.q);
        let mut alpha_flags: BTreeMap<String, String> =
            c.alpha_bits.iter().map(|(k, &v)| (k.clone(), bit_string(v))).collect();
        let mut certificate_notes = Vec::new();
        if let Some(r) = r {
            for b in &r.bits {
                alpha_flags.insert(b.name.clone(), bit_string(b.state));
                for e in &b.evidence {
                    certificate_notes.push(format!("{} [{}] {e}", b.name, b.candidate));
                }
            }
        }
        ResultRecord {
            p: p.to_string(),
            q: q.to_string(),
            p_mod8: c.p_mod8.to_string(),
            q_mod8: c.q_mod8.to_string(),
            legendre_pq: c.legendre_pq.to_string(),
            norm_eps_2p: c.norm_eps_2p.map(|n| n.to_string()),
            x_case: c.x_case.map(|s| s.label().to_string()),
            v_case: c.v_case.map(|s| s.label().to_string()),
            u_sign: c.u_sign.map(|u| u.to_string()),
            theorem: c.theorem.label(),
            nearest_theorem: match &c.theorem {
                crate::triquad::TheoremId::Unsupported { nearest } => Some(nearest.clone()),
                _ => None,
            },
            subfield_h2: r
                .map(|r| {
                    r.subfield_h2
                        .iter()
                        .map(|(m, h)| (m.value(p, q).to_string(), h.to_string()))
                        .collect()
                })
                .unwrap_or_default(),
            generators: r
                .map(|r| r.generators.iter().map(|g| g.to_string()).collect())
                .unwrap_or_default(),
            q_index: r.map(|r| resolved_string(&r.q_index)),
            q_index_stated: r.and_then(|r| r.q_index_stated).map(|v| v.to_string()),
            h2_k: r.map(|r| resolved_string(&r.h2_k)),
            h2_k_resolved: r.map_or(false, |r| r.h2_k.exact().is_some()),
            kuroda_h2: r.map(|r| resolved_string(&r.kuroda_h2)),
            kuroda_consistent: r.map(|r| r.kuroda_consistent),
            k5_identity: r.and_then(|r| r.k5_identity),
            structure: r.map(|r| r.structure.to_string()),
            type22: a.type22,
            alpha_flags,
            certificate_notes,
            notes: r.map(|r| r.notes.clone()).unwrap_or_default(),
            denom_bound: cfg
                .square
                .denom_bound
                .unwrap_or(16 * p * q)
                .to_string(),
            max_precision_bits: cfg.square.max_precision_bits.to_string(),
            exact_fallback: cfg.exact_fallback,
            wall_time_ms: None,
        }
    }

    pub fn structure(&self) -> Option<Structure> {
        self.structure.as_deref().and_then(|s| match s {
            "trivial" => Some(Structure::Trivial),
            "cyclic" => Some(Structure::Cyclic),
            "two_two" => Some(Structure::TwoTwo),
            "unknown" => Some(Structure::Unknown),
            _ => None,
        })
    }
}

/// Which pairs a scan keeps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScanFilter {
    /// Pairs where Theorem 4.1's conditions hold.
    Type22,
    /// Pairs whose theorem label equals or starts with this label (see
    /// [`crate::triquad::TheoremId::matches`]).
    Theorem(String),
}

impl ScanFilter {
    pub fn parse(s: &str) -> ScanFilter {
        if s.eq_ignore_ascii_case("type22") {
            ScanFilter::Type22
        } else {
            ScanFilter::Theorem(s.to_string())
        }
    }

    fn keeps(&self, a: &Analysis) -> bool {
        match self {
            ScanFilter::Type22 => a.type22,
            ScanFilter::Theorem(t) => a.classification.theorem.matches(t),
        }
    }
}

/// Analyses every supported pair of distinct odd primes p ≤ p_max, q ≤ q_max.
///
/// Pairs are evaluated in parallel and returned in (p, q) ascending order.
/// The first hard error in that order is returned instead.
pub fn scan(p_max: u64, q_max: u64, filter: Option<&ScanFilter>, cfg: &EngineConfig) -> Result<Vec<Analysis>> {
    if p_max < 3 || q_max < 3 {
        return Err(Error::InvalidInput(format!("scan bounds must be ≥ 3, got {p_max}, {q_max}")));
    }
    let ps = odd_primes_below(p_max + 1);
    let qs = odd_primes_below(q_max + 1);
    let pairs: Vec<(u64, u64)> = ps
        .iter()
        .flat_map(|&p| qs.iter().filter(move |&&q| q != p).map(move |&q| (p, q)))
        .collect();
    let results: Vec<Result<Analysis>> = pairs.par_iter().map(|&(p, q)| analyze(p, q, cfg)).collect();
    let mut out = Vec::new();
    for r in results {
        let a = r?;
        if a.is_supported() && filter.map_or(true, |f| f.keeps(&a)) {
            out.push(a);
        }
    }
    Ok(out)
}
