use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{BoundState, ScatteringData, ScatteringNode};
use crate::background::DirichletData;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    edges: Vec<f64>,
    dirichlet: DirichletData,
    nodes_per_band: usize,
    bound_states: Vec<BoundState>,
    t0: f64,
}

#[derive(Serialize, Deserialize)]
struct Row {
    band: usize,
    side: f64,
    re_w: f64,
    im_w: f64,
    lambda: f64,
    weight: f64,
    #[serde(rename = "re_T")]
    re_t: f64,
    #[serde(rename = "im_T")]
    im_t: f64,
    re_rp: f64,
    im_rp: f64,
    re_rm: f64,
    im_rm: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes scattering data as one JSON header line followed by a CSV table of nodes.
pub fn write_interchange<W: Write>(data: &ScatteringData, mut out: W) -> Result<()> {
    let header = Header {
        edges: data.edges.clone(),
        dirichlet: data.dirichlet.clone(),
        nodes_per_band: data.nodes_per_band,
        bound_states: data.bound_states.clone(),
        t0: data.t0,
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(out, "{line}")?;
    let mut w = csv::Writer::from_writer(out);
    for n in &data.nodes {
        w.serialize(Row {
            band: n.band,
            side: n.side,
            re_w: n.w.re,
            im_w: n.w.im,
            lambda: n.lambda,
            weight: n.weight,
            re_t: n.t.re,
            im_t: n.t.im,
            re_rp: n.r_plus.re,
            im_rp: n.r_plus.im,
            re_rm: n.r_minus.re,
            im_rm: n.r_minus.im,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the format produced by [`write_interchange`].
pub fn read_interchange<R: Read>(input: R) -> Result<ScatteringData> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let header: Header =
        serde_json::from_str(first.trim()).map_err(|e| Error::Parse(format!("header: {e}")))?;
    let mut nodes = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize::<Row>() {
        let r = row.map_err(csv_err)?;
        nodes.push(ScatteringNode {
            band: r.band,
            lambda: r.lambda,
            side: r.side,
            w: Complex64::new(r.re_w, r.im_w),
            weight: r.weight,
            t: Complex64::new(r.re_t, r.im_t),
            r_plus: Complex64::new(r.re_rp, r.im_rp),
            r_minus: Complex64::new(r.re_rm, r.im_rm),
        });
    }
    let g1 = header.edges.len() / 2;
    if header.edges.len() % 2 != 0 || nodes.len() != 2 * g1 * header.nodes_per_band {
        return Err(Error::Parse(format!(
            "expected {} nodes for {} bands, found {}",
            2 * g1 * header.nodes_per_band,
            g1,
            nodes.len()
        )));
    }
    for pair in nodes.chunks(2) {
        if pair[0].side <= 0.0 || pair[1].side >= 0.0 || pair[0].lambda != pair[1].lambda {
            return Err(Error::Parse("nodes must come in upper/lower bank pairs".into()));
        }
    }
    Ok(ScatteringData {
        edges: header.edges,
        dirichlet: header.dirichlet,
        nodes_per_band: header.nodes_per_band,
        nodes,
        bound_states: header.bound_states,
        t0: header.t0,
    })
}
