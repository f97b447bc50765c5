use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// One mean-field epoch of the flat-prior (or explicit) sampler.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlatTraceRow {
    pub epoch: u64,
    pub sims: u64,
    pub accept_rate: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub eps: f64,
    pub eps_e: f64,
    pub gamma: f64,
    pub ess: f64,
    #[serde(rename = "S_irr_rate")]
    pub s_irr_rate: f64,
}

/// One mean-field epoch of the informative-prior sampler.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfoTraceRow {
    pub epoch: u64,
    pub sims: u64,
    pub accept_rate: f64,
    #[serde(rename = "U1")]
    pub u1: f64,
    #[serde(rename = "U2")]
    pub u2: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps1_e: f64,
    pub eps2_e: f64,
    #[serde(rename = "L11")]
    pub l11: f64,
    #[serde(rename = "L12")]
    pub l12: f64,
    #[serde(rename = "L22")]
    pub l22: f64,
    pub ess: f64,
    #[serde(rename = "S_irr_rate")]
    pub s_irr_rate: f64,
}

pub const FLAT_TRACE_HEADER: &[&str] = &[
    "epoch",
    "sims",
    "accept_rate",
    "U",
    "eps",
    "eps_e",
    "gamma",
    "ess",
    "S_irr_rate",
];

pub const INFO_TRACE_HEADER: &[&str] = &[
    "epoch",
    "sims",
    "accept_rate",
    "U1",
    "U2",
    "eps1",
    "eps2",
    "eps1_e",
    "eps2_e",
    "L11",
    "L12",
    "L22",
    "ess",
    "S_irr_rate",
];

/// Diagnostics trace, one row per epoch.
#[derive(Clone, Debug, PartialEq)]
pub enum Trace {
    Flat(Vec<FlatTraceRow>),
    Informative(Vec<InfoTraceRow>),
}

impl Trace {
    pub fn len(&self) -> usize {
        match self {
            Trace::Flat(r) => r.len(),
            Trace::Informative(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn header(&self) -> &'static [&'static str] {
        match self {
            Trace::Flat(_) => FLAT_TRACE_HEADER,
            Trace::Informative(_) => INFO_TRACE_HEADER,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        w.write_record(self.header())?;
        match self {
            Trace::Flat(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
            Trace::Informative(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
        }
        w.flush()?;
        Ok(())
    }
}
