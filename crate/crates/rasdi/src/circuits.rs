//! RLC netlists assembled into semi-explicit DAEs, plus the built-in test
//! circuits and their partitions.
//!
//! Each element `(n+, n-)` carries a current variable named after the
//! element; that current leaves `n+` and enters `n-`. Every capacitor gets a
//! differential auxiliary voltage `v = e+ - e-` so that no algebraic variable
//! is differentiated. Variable order is: inductor currents, capacitor
//! auxiliaries, node potentials, remaining element currents.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::aitken::ClosedForm;
use crate::dae::{self, CombinedSystem, Forcing, LinearDae};
use crate::linalg::Lu;
use crate::nonlinear::NonlinearConductance;
use crate::partition::{grow_overlap, AdjacencyGraph, OverlapPartition};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Cos,
    Sin,
}

/// `amp * window(t) * shape(2 pi freq t)`; the window multiplies the
/// amplitude by `gain` on `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waveform {
    pub amp: f64,
    pub freq: f64,
    pub shape: Shape,
    pub window: Option<AmplitudeWindow>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudeWindow {
    pub start: f64,
    pub end: f64,
    pub gain: f64,
}

impl Waveform {
    pub fn cos(amp: f64, freq: f64) -> Self {
        Waveform {
            amp,
            freq,
            shape: Shape::Cos,
            window: None,
        }
    }

    pub fn sin(amp: f64, freq: f64) -> Self {
        Waveform {
            shape: Shape::Sin,
            ..Waveform::cos(amp, freq)
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let phase = 2.0 * PI * self.freq * t;
        let base = match self.shape {
            Shape::Cos => phase.cos(),
            Shape::Sin => phase.sin(),
        };
        let gain = match self.window {
            Some(w) if t >= w.start && t < w.end => w.gain,
            _ => 1.0,
        };
        self.amp * gain * base
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ElementKind {
    Resistor(f64),
    Conductance(f64),
    Inductor(f64),
    Capacitor { c: f64, aux: Option<String> },
    VoltageSource { wave: Waveform, zs: f64 },
    CurrentSource { wave: Waveform },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    /// Also the name of the element's current variable.
    pub name: String,
    pub pos: String,
    pub neg: String,
    pub kind: ElementKind,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Netlist {
    pub elements: Vec<Element>,
    pub ground: Option<String>,
    /// Explicit node order; nodes not listed follow in first-use order.
    pub node_order: Vec<String>,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace-separated tokens with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(s, t)| (line[..s].chars().count() + 1, t))
        .collect()
}

fn number(line: usize, (col, tok): (usize, &str)) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(line, col, format!("expected a number, found `{tok}`")))
}

fn positive(line: usize, tok: (usize, &str)) -> Result<f64> {
    let v = number(line, tok)?;
    if v <= 0.0 {
        return Err(parse_err(
            line,
            tok.0,
            format!("value must be positive, found `{}`", tok.1),
        ));
    }
    Ok(v)
}

impl Netlist {
    /// Parses the line format
    ///
    /// ```text
    /// # comment
    /// .ground er
    /// .nodes e1 e2 e3 er
    /// L    i1 e1 e2 0.4
    /// G    i2 e1 e2 2e-3
    /// R    ir e2 e3 10
    /// C    i4 e3 e2 1e-6 aux=v1
    /// VSRC i5 e1 e3 1.0 50 1e-6 wave=cos window=0.02:0.021:1.5
    /// ISRC i6 e3 er 1e-3 50 wave=sin
    /// ```
    pub fn parse(text: &str) -> Result<Netlist> {
        let mut net = Netlist::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let content = raw.split('#').next().unwrap_or("");
            let toks = tokens(content);
            let Some(&(col0, head)) = toks.first() else {
                continue;
            };
            match head {
                ".ground" => {
                    if toks.len() != 2 {
                        return Err(parse_err(line, col0, ".ground takes exactly one node"));
                    }
                    net.ground = Some(toks[1].1.to_string());
                }
                ".nodes" => net.node_order.extend(toks[1..].iter().map(|t| t.1.to_string())),
                "R" | "G" | "L" | "C" | "VSRC" | "ISRC" => net.elements.push(parse_element(line, &toks)?),
                other => return Err(parse_err(line, col0, format!("unknown statement `{other}`"))),
            }
        }
        Ok(net)
    }

    /// Node names in variable order.
    pub fn nodes(&self) -> Vec<String> {
        let mut nodes = self.node_order.clone();
        let mut add = |n: &String| {
            if !nodes.contains(n) {
                nodes.push(n.clone());
            }
        };
        for e in &self.elements {
            add(&e.pos);
            add(&e.neg);
        }
        if let Some(g) = &self.ground {
            add(g);
        }
        nodes
    }
}

fn parse_element(line: usize, toks: &[(usize, &str)]) -> Result<Element> {
    let (col0, head) = toks[0];
    let positional = toks.iter().take_while(|t| !t.1.contains('=')).count();
    let options = &toks[positional..];
    let need = match head {
        "VSRC" => 7,
        "ISRC" => 6,
        _ => 5,
    };
    if positional != need {
        let col = toks.get(positional.min(need)).map(|t| t.0).unwrap_or(col0);
        return Err(parse_err(
            line,
            col,
            format!(
                "{head} expects {} positional fields, found {}",
                need - 1,
                positional - 1
            ),
        ));
    }
    let mut aux = None;
    let mut shape = None;
    let mut window = None;
    for &(col, tok) in options {
        let (key, val) = tok.split_once('=').expect("options contain '='");
        match (head, key) {
            ("C", "aux") => aux = Some(val.to_string()),
            ("VSRC" | "ISRC", "wave") => {
                shape = Some(match val {
                    "cos" => Shape::Cos,
                    "sin" => Shape::Sin,
                    _ => return Err(parse_err(line, col, format!("unknown waveform `{val}`"))),
                })
            }
            ("VSRC" | "ISRC", "window") => {
                let parts: Vec<&str> = val.split(':').collect();
                let nums: Option<Vec<f64>> = parts.iter().map(|p| p.parse().ok()).collect();
                match nums.as_deref() {
                    Some(&[start, end, gain]) if end > start => window = Some(AmplitudeWindow { start, end, gain }),
                    _ => return Err(parse_err(line, col, "window must be start:end:gain with end > start")),
                }
            }
            _ => return Err(parse_err(line, col, format!("unknown option `{key}` for {head}"))),
        }
    }
    let name = toks[1].1.to_string();
    let (pos, neg) = (toks[2].1.to_string(), toks[3].1.to_string());
    if pos == neg {
        return Err(parse_err(line, toks[3].0, "element terminals must differ"));
    }
    let kind = match head {
        "R" => ElementKind::Resistor(positive(line, toks[4])?),
        "G" => ElementKind::Conductance(positive(line, toks[4])?),
        "L" => ElementKind::Inductor(positive(line, toks[4])?),
        "C" => ElementKind::Capacitor {
            c: positive(line, toks[4])?,
            aux,
        },
        "VSRC" => {
            let zs = number(line, toks[6])?;
            if zs < 0.0 {
                return Err(parse_err(line, toks[6].0, "series impedance must be nonnegative"));
            }
            ElementKind::VoltageSource {
                wave: Waveform {
                    amp: number(line, toks[4])?,
                    freq: number(line, toks[5])?,
                    shape: shape.unwrap_or(Shape::Cos),
                    window,
                },
                zs,
            }
        }
        "ISRC" => ElementKind::CurrentSource {
            wave: Waveform {
                amp: number(line, toks[4])?,
                freq: number(line, toks[5])?,
                shape: shape.unwrap_or(Shape::Sin),
                window,
            },
        },
        _ => unreachable!("dispatched on known heads"),
    };
    Ok(Element { name, pos, neg, kind })
}

/// `aux = e_pos - e_neg`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxDef {
    pub aux: String,
    pub pos: String,
    pub neg: String,
}

/// Assembled circuit with named variables.
#[derive(Clone, Debug)]
pub struct CircuitDae {
    pub system: CombinedSystem,
    pub names: Vec<String>,
    pub aux_defs: Vec<AuxDef>,
}

impl CircuitDae {
    pub fn dae(&self) -> LinearDae {
        self.system.to_dae()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn indices(&self, names: &[&str]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.index(n)
                    .ok_or_else(|| Error::InvalidConfig(format!("no variable named `{n}`")))
            })
            .collect()
    }

    pub fn graph(&self) -> AdjacencyGraph {
        AdjacencyGraph::from_matrix(&self.system.big_a)
    }

    /// Partition from named base sets.
    pub fn partition(&self, base: &[Vec<&str>], p: usize) -> Result<OverlapPartition> {
        let base = base.iter().map(|b| self.indices(b)).collect::<Result<Vec<_>>>()?;
        grow_overlap(&self.graph(), &base, p, &self.system.diff_mask)
    }

    /// Base split with the named variables on one side and the rest on the other.
    pub fn two_way(&self, first: &[&str], p: usize) -> Result<OverlapPartition> {
        let first = self.indices(first)?;
        let rest: Vec<usize> = (0..self.names.len()).filter(|i| !first.contains(i)).collect();
        grow_overlap(&self.graph(), &[first, rest], p, &self.system.diff_mask)
    }
}

enum Source {
    Voltage(usize, Waveform),
    Current(usize, Waveform),
}

pub fn assemble(net: &Netlist) -> Result<CircuitDae> {
    let ground = net
        .ground
        .clone()
        .ok_or_else(|| Error::SingularAlgebraicBlock("no ground node declared".into()))?;
    let nodes = net.nodes();
    if net.elements.is_empty() {
        return Err(Error::SingularAlgebraicBlock("netlist has no elements".into()));
    }
    check_connected(net, &nodes, &ground)?;

    let mut names: Vec<String> = Vec::new();
    let mut aux_defs = Vec::new();
    for e in &net.elements {
        if let ElementKind::Inductor(_) = e.kind {
            names.push(e.name.clone());
        }
    }
    for e in &net.elements {
        if let ElementKind::Capacitor { aux, .. } = &e.kind {
            let aux = aux.clone().unwrap_or_else(|| format!("v_{}", e.name));
            aux_defs.push(AuxDef {
                aux: aux.clone(),
                pos: e.pos.clone(),
                neg: e.neg.clone(),
            });
            names.push(aux);
        }
    }
    let n1 = names.len();
    names.extend(nodes.iter().cloned());
    for e in &net.elements {
        if !matches!(e.kind, ElementKind::Inductor(_)) {
            names.push(e.name.clone());
        }
    }
    let mut idx: HashMap<&str, usize> = HashMap::new();
    for (i, n) in names.iter().enumerate() {
        if idx.insert(n.as_str(), i).is_some() {
            return Err(Error::InvalidConfig(format!("variable name `{n}` is used twice")));
        }
    }

    let n = names.len();
    let mut a = DMatrix::zeros(n, n);
    let mut sources = Vec::new();
    let v = |s: &str| idx[s];
    let mut aux_iter = aux_defs.iter();
    for e in &net.elements {
        let (i, p, q) = (v(&e.name), v(&e.pos), v(&e.neg));
        // Kirchhoff rows, skipped at ground.
        if e.pos != ground {
            a[(p, i)] += 1.0;
        }
        if e.neg != ground {
            a[(q, i)] -= 1.0;
        }
        match &e.kind {
            ElementKind::Inductor(l) => {
                a[(i, p)] -= 1.0 / l;
                a[(i, q)] += 1.0 / l;
            }
            ElementKind::Capacitor { c, .. } => {
                let aux = v(&aux_iter.next().expect("one aux per capacitor").aux);
                a[(aux, i)] -= 1.0 / c;
                a[(i, aux)] += 1.0;
                a[(i, p)] -= 1.0;
                a[(i, q)] += 1.0;
            }
            ElementKind::Resistor(r) => {
                a[(i, p)] += 1.0;
                a[(i, q)] -= 1.0;
                a[(i, i)] -= r;
            }
            ElementKind::Conductance(g) => {
                a[(i, p)] += g;
                a[(i, q)] -= g;
                a[(i, i)] -= 1.0;
            }
            ElementKind::VoltageSource { wave, zs } => {
                a[(i, p)] += 1.0;
                a[(i, q)] -= 1.0;
                a[(i, i)] -= zs;
                sources.push(Source::Voltage(i, *wave));
            }
            ElementKind::CurrentSource { wave } => {
                a[(i, i)] -= 1.0;
                sources.push(Source::Current(i, *wave));
            }
        }
    }
    let g = v(&ground);
    a[(g, g)] = 1.0;

    let forcing: Forcing = Arc::new(move |t| {
        let mut b = DVector::zeros(n);
        for s in &sources {
            match s {
                Source::Voltage(row, w) => b[*row] += w.eval(t),
                Source::Current(row, w) => b[*row] -= w.eval(t),
            }
        }
        b
    });
    let system = CombinedSystem {
        big_a: a,
        diff_mask: (0..n).map(|i| i < n1).collect(),
        forcing,
        x0: DVector::zeros(n1),
    };
    let solvable = [1e-9, 1e-6, 1e-3, 1.0]
        .iter()
        .any(|&dt| Lu::new(&dae::step_matrix(&system.big_a, &system.diff_mask, dt)).is_some());
    if !solvable {
        return Err(Error::SingularAlgebraicBlock(
            "backward-Euler step matrix is singular at every probed step size".into(),
        ));
    }
    Ok(CircuitDae {
        system,
        names,
        aux_defs,
    })
}

/// Every node must reach ground through elements.
fn check_connected(net: &Netlist, nodes: &[String], ground: &str) -> Result<()> {
    let pos = |s: &str| {
        nodes
            .iter()
            .position(|n| n == s)
            .expect("node list covers all terminals")
    };
    let mut reached = vec![false; nodes.len()];
    reached[pos(ground)] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for e in &net.elements {
            let (p, q) = (pos(&e.pos), pos(&e.neg));
            if reached[p] != reached[q] {
                reached[p] = true;
                reached[q] = true;
                changed = true;
            }
        }
    }
    match reached.iter().position(|r| !r) {
        Some(i) => Err(Error::FloatingNode(nodes[i].clone())),
        None => Ok(()),
    }
}

/// A circuit with its partition and, where known, its closed-form spectrum.
#[derive(Clone, Debug)]
pub struct Preset {
    pub circuit: CircuitDae,
    pub partition: OverlapPartition,
    pub closed_form: Option<ClosedForm>,
}

/// Parameters of the two-inductor test circuits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoBranchParams {
    pub l1: f64,
    pub l2: f64,
    pub c: f64,
    pub g: f64,
    pub source_amp: f64,
    pub current_amp: f64,
    pub freq: f64,
    pub zs: f64,
}

impl TwoBranchParams {
    pub fn ex1() -> Self {
        TwoBranchParams {
            l1: 0.4,
            l2: 0.5,
            c: 1e-6,
            g: 2e-3,
            source_amp: 1.0,
            current_amp: 1e-3,
            freq: 50.0,
            zs: 0.0,
        }
    }

    pub fn ex2() -> Self {
        TwoBranchParams {
            l1: 0.5,
            l2: 0.7,
            ..Self::ex1()
        }
    }

    pub fn ex2_swapped() -> Self {
        TwoBranchParams {
            l1: 0.4,
            l2: 0.3,
            ..Self::ex1()
        }
    }

    fn check(&self) -> Result<()> {
        let vals = [self.l1, self.l2, self.c, self.g, self.freq];
        if vals.iter().any(|v| !(*v > 0.0)) || self.zs < 0.0 {
            return Err(Error::InvalidConfig("circuit parameters must be positive".into()));
        }
        Ok(())
    }
}

fn two_branch_netlist(p: &TwoBranchParams, l1_to_ground: bool) -> String {
    let l1_neg = if l1_to_ground { "er" } else { "e2" };
    format!(
        ".ground er\n.nodes e1 e2 e3 er\n\
         L i1 e1 {l1_neg} {}\nG i2 e1 e2 {}\nL i3 e2 er {}\nC i4 e3 e2 {} aux=v1\n\
         VSRC i5 e1 e3 {} {} {} wave=cos\nISRC i6 e3 er {} {} wave=sin\n",
        p.l1, p.g, p.l2, p.c, p.source_amp, p.freq, p.zs, p.current_amp, p.freq
    )
}

/// Inductor `l1` between nodes e1 and e2, split off on its own.
pub fn ex1(p: &TwoBranchParams) -> Result<Preset> {
    p.check()?;
    let circuit = assemble(&Netlist::parse(&two_branch_netlist(p, false))?)?;
    let partition = circuit.two_way(&["i1"], 0)?;
    Ok(Preset {
        circuit,
        partition,
        closed_form: Some(ClosedForm::Ex1 {
            l1: p.l1,
            c: p.c,
            g: p.g,
        }),
    })
}

/// Inductor `l1` from e1 to ground, split off on its own.
pub fn ex2(p: &TwoBranchParams) -> Result<Preset> {
    p.check()?;
    let circuit = assemble(&Netlist::parse(&two_branch_netlist(p, true))?)?;
    let partition = circuit.two_way(&["i1"], 0)?;
    Ok(Preset {
        circuit,
        partition,
        closed_form: Some(ClosedForm::Ex2 {
            l1: p.l1,
            l2: p.l2,
            c: p.c,
            g: p.g,
        }),
    })
}

/// Parameters of the seven-node ring used for EMT-phasor coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingParams {
    pub l1: f64,
    pub l2: f64,
    pub c1: f64,
    pub c2: f64,
    pub r1: f64,
    pub r2: f64,
    pub source_amp: f64,
    pub freq: f64,
    pub zs: f64,
    pub window: Option<AmplitudeWindow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RingPreset {
    /// Heavy ring; plain sweeps grow the interface error about 1.18x each.
    Baseline,
    /// Unequal capacitors and an amplitude disturbance on `[0.02, 0.021)`;
    /// growth about 7.5x per sweep.
    Disturbance,
    /// Light ring; growth about 3.39x per sweep.
    Divergent,
}

impl std::str::FromStr for RingPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(RingPreset::Baseline),
            "disturbance" => Ok(RingPreset::Disturbance),
            "divergent" => Ok(RingPreset::Divergent),
            _ => Err(Error::UnknownCircuit(s.to_string())),
        }
    }
}

impl RingParams {
    pub fn preset(which: RingPreset) -> Self {
        let base = RingParams {
            l1: 0.7,
            l2: 0.7,
            c1: 1e-6,
            c2: 1e-6,
            r1: 77.0,
            r2: 77.0,
            source_amp: 5.0,
            freq: 50.0,
            zs: 1e-6,
            window: None,
        };
        match which {
            RingPreset::Baseline => base,
            RingPreset::Disturbance => RingParams {
                l1: 0.07,
                l2: 0.07,
                c1: 1e-5,
                c2: 1e-7,
                r1: 7.0,
                r2: 7.0,
                window: Some(AmplitudeWindow {
                    start: 0.02,
                    end: 0.021,
                    gain: 1.5,
                }),
                ..base
            },
            RingPreset::Divergent => RingParams {
                l1: 0.07,
                l2: 0.07,
                r1: 7.0,
                r2: 7.0,
                ..base
            },
        }
    }
}

/// Variables owned by the phasor side of the ring.
pub const RING_PHASOR_BASE: [&str; 3] = ["v5", "i56", "v6"];

/// Ring circuit; partition 0 is the EMT side, partition 1 the phasor side,
/// both grown by one ring.
pub fn emt_ts(p: &RingParams) -> Result<Preset> {
    let vals = [p.l1, p.l2, p.c1, p.c2, p.r1, p.r2, p.freq];
    if vals.iter().any(|v| !(*v > 0.0)) || p.zs < 0.0 {
        return Err(Error::InvalidConfig("circuit parameters must be positive".into()));
    }
    let window = p
        .window
        .map(|w| format!(" window={}:{}:{}", w.start, w.end, w.gain))
        .unwrap_or_default();
    let text = format!(
        ".ground v1\n.nodes v1 v2 v3 v4 v5 v6 v7\n\
         VSRC i12 v1 v2 {} {} {} wave=cos{window}\n\
         L i23 v2 v3 {}\nR i34 v3 v4 {}\nC i45 v4 v5 {} aux=vc1\n\
         R i56 v5 v6 {}\nL i67 v6 v7 {}\nC i71 v7 v1 {} aux=vc2\n",
        p.source_amp, p.freq, p.zs, p.l1, p.r1, p.c1, p.r2, p.l2, p.c2
    );
    let circuit = assemble(&Netlist::parse(&text)?)?;
    let ts = circuit.indices(&RING_PHASOR_BASE)?;
    let emt: Vec<usize> = (0..circuit.names.len()).filter(|i| !ts.contains(i)).collect();
    let partition = grow_overlap(&circuit.graph(), &[emt, ts], 1, &circuit.system.diff_mask)?;
    Ok(Preset {
        circuit,
        partition,
        closed_form: None,
    })
}

/// Parameters of the two-branch circuit with a current-controlled conductance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonlinearParams {
    pub l1: f64,
    pub l2: f64,
    pub c: f64,
    pub g0: f64,
    pub alpha: f64,
    pub source_amp: f64,
    pub current_amp: f64,
    pub freq: f64,
    pub zs: f64,
}

impl Default for NonlinearParams {
    fn default() -> Self {
        NonlinearParams {
            l1: 0.6,
            l2: 0.7,
            c: 1e-6,
            g0: 10.0,
            alpha: 2000.0,
            source_amp: 1e-2,
            current_amp: 1e-5,
            freq: 50.0,
            zs: 0.0,
        }
    }
}

/// Second two-branch circuit with `G = 1 / (g0 + alpha i2)`.
pub fn ex2_nonlinear(p: &NonlinearParams) -> Result<(Preset, NonlinearConductance)> {
    if !(p.g0 > 0.0) {
        return Err(Error::InvalidConfig("g0 must be positive".into()));
    }
    let linear = TwoBranchParams {
        l1: p.l1,
        l2: p.l2,
        c: p.c,
        g: 1.0 / p.g0,
        source_amp: p.source_amp,
        current_amp: p.current_amp,
        freq: p.freq,
        zs: p.zs,
    };
    let preset = ex2(&linear)?;
    let element = NonlinearConductance::from_circuit(&preset.circuit, "i2", p.g0, p.alpha)?;
    Ok((preset, element))
}

/// Named built-in circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CircuitId {
    Ex1,
    Ex2,
    Ex2Swapped,
    EmtTs,
    Ex2Nonlinear,
}

impl std::str::FromStr for CircuitId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex1" => Ok(CircuitId::Ex1),
            "ex2" => Ok(CircuitId::Ex2),
            "ex2-swapped" | "ex2_swapped" => Ok(CircuitId::Ex2Swapped),
            "emt-ts" | "emt_ts" => Ok(CircuitId::EmtTs),
            "nonlinear" | "ex2-nonlinear" | "ex2_nonlinear" => Ok(CircuitId::Ex2Nonlinear),
            _ => Err(Error::UnknownCircuit(s.to_string())),
        }
    }
}

/// Built-in circuit with default parameters.
pub fn builtin(id: CircuitId) -> Result<Preset> {
    match id {
        CircuitId::Ex1 => ex1(&TwoBranchParams::ex1()),
        CircuitId::Ex2 => ex2(&TwoBranchParams::ex2()),
        CircuitId::Ex2Swapped => ex2(&TwoBranchParams::ex2_swapped()),
        CircuitId::EmtTs => emt_ts(&RingParams::preset(RingPreset::Divergent)),
        CircuitId::Ex2Nonlinear => ex2_nonlinear(&NonlinearParams::default()).map(|(p, _)| p),
    }
}
