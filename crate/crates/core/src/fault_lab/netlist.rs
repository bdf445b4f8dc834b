//! Gate-level netlists in ISCAS `.bench` syntax, converted to full scan.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use super::FaultLabError;

pub type NetId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buff,
    Dff,
}

impl GateKind {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name.to_ascii_uppercase().as_str() {
            "AND" => Self::And,
            "NAND" => Self::Nand,
            "OR" => Self::Or,
            "NOR" => Self::Nor,
            "XOR" => Self::Xor,
            "XNOR" => Self::Xnor,
            "NOT" | "INV" => Self::Not,
            "BUFF" | "BUF" => Self::Buff,
            "DFF" => Self::Dff,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::And => "AND",
            Self::Nand => "NAND",
            Self::Or => "OR",
            Self::Nor => "NOR",
            Self::Xor => "XOR",
            Self::Xnor => "XNOR",
            Self::Not => "NOT",
            Self::Buff => "BUFF",
            Self::Dff => "DFF",
        }
    }

    fn single_input(self) -> bool {
        matches!(self, Self::Not | Self::Buff | Self::Dff)
    }

    /// Evaluates the gate on 64 patterns at once.
    #[inline]
    pub fn eval<I: Iterator<Item = u64>>(self, mut inputs: I) -> u64 {
        let first = inputs.next().unwrap_or(0);
        match self {
            Self::And => inputs.fold(first, |a, b| a & b),
            Self::Nand => !inputs.fold(first, |a, b| a & b),
            Self::Or => inputs.fold(first, |a, b| a | b),
            Self::Nor => !inputs.fold(first, |a, b| a | b),
            Self::Xor => inputs.fold(first, |a, b| a ^ b),
            Self::Xnor => !inputs.fold(first, |a, b| a ^ b),
            Self::Not => !first,
            Self::Buff | Self::Dff => first,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
}

/// A combinational circuit. Flip-flops have been cut: each DFF output is a
/// pseudo-primary input and each DFF data net a pseudo-primary output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub name: String,
    net_names: Vec<String>,
    /// Primary inputs followed by pseudo-primary inputs.
    inputs: Vec<NetId>,
    num_pis: usize,
    /// Primary outputs followed by pseudo-primary outputs.
    outputs: Vec<NetId>,
    num_pos: usize,
    /// Topologically ordered, no DFFs.
    gates: Vec<Gate>,
    /// Position in `gates` of each net's driver; `None` for inputs.
    driver: Vec<Option<usize>>,
    fanout: Vec<Vec<usize>>,
}

impl Netlist {
    pub fn num_nets(&self) -> usize {
        self.net_names.len()
    }

    pub fn net_name(&self, net: NetId) -> &str {
        &self.net_names[net]
    }

    pub fn net_by_name(&self, name: &str) -> Option<NetId> {
        self.net_names.iter().position(|n| n == name)
    }

    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_pis(&self) -> usize {
        self.num_pis
    }

    pub fn num_ppis(&self) -> usize {
        self.inputs.len() - self.num_pis
    }

    pub fn num_pos(&self) -> usize {
        self.num_pos
    }

    pub fn num_ppos(&self) -> usize {
        self.outputs.len() - self.num_pos
    }

    /// Width of a test vector: PIs plus PPIs.
    pub fn input_width(&self) -> usize {
        self.inputs.len()
    }

    pub(crate) fn driver(&self, net: NetId) -> Option<usize> {
        self.driver[net]
    }

    /// Gate positions reading each net.
    pub(crate) fn fanout(&self, net: NetId) -> &[usize] {
        &self.fanout[net]
    }

    /// Writes the circuit back as `.bench` text (combinational form, with
    /// PPIs and PPOs listed as plain inputs and outputs).
    pub fn to_bench(&self) -> String {
        let mut out = format!("# {}\n", self.name);
        for &n in &self.inputs {
            let _ = writeln!(out, "INPUT({})", self.net_names[n]);
        }
        for &n in &self.outputs {
            let _ = writeln!(out, "OUTPUT({})", self.net_names[n]);
        }
        for g in &self.gates {
            let args: Vec<&str> = g.inputs.iter().map(|&n| self.net_names[n].as_str()).collect();
            let _ = writeln!(out, "{} = {}({})", self.net_names[g.output], g.kind.name(), args.join(", "));
        }
        out
    }
}

enum Stmt {
    Input(NetId),
    Output(NetId),
    Gate { line: usize, kind: GateKind, output: NetId, inputs: Vec<NetId> },
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || "(),=#".contains(c))
}

fn call_parts(text: &str, line: usize) -> Result<(&str, Vec<&str>), FaultLabError> {
    let syntax = |msg: &str| FaultLabError::Syntax { line, msg: msg.to_string() };
    let open = text.find('(').ok_or_else(|| syntax("expected `(`"))?;
    let rest = text[open + 1..].trim_end();
    let inner = rest.strip_suffix(')').ok_or_else(|| syntax("expected `)` at end of line"))?;
    if inner.contains('(') || inner.contains(')') {
        return Err(syntax("unbalanced parentheses"));
    }
    let head = text[..open].trim();
    let args: Vec<&str> = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    if let Some(bad) = args.iter().find(|a| !valid_name(a)) {
        return Err(syntax(&format!("invalid net name `{bad}`")));
    }
    Ok((head, args))
}

/// Parses `.bench` text. Nets are numbered in order of first appearance.
pub fn parse_bench(name: &str, text: &str) -> Result<Netlist, FaultLabError> {
    let mut ids: HashMap<String, NetId> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut intern = |n: &str| -> NetId {
        if let Some(&id) = ids.get(n) {
            return id;
        }
        ids.insert(n.to_string(), names.len());
        names.push(n.to_string());
        names.len() - 1
    };

    let mut stmts = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some((lhs, rhs)) = body.split_once('=') {
            let lhs = lhs.trim();
            if !valid_name(lhs) {
                return Err(FaultLabError::Syntax { line, msg: format!("invalid net name `{lhs}`") });
            }
            let (gate, args) = call_parts(rhs.trim(), line)?;
            let kind = GateKind::parse(gate)
                .ok_or_else(|| FaultLabError::UnknownGate { line, name: gate.to_string() })?;
            if args.is_empty() || (kind.single_input() && args.len() != 1) {
                return Err(FaultLabError::Arity { line, gate: kind.name() });
            }
            let output = intern(lhs);
            let inputs = args.iter().map(|a| intern(a)).collect();
            stmts.push(Stmt::Gate { line, kind, output, inputs });
        } else {
            let (head, args) = call_parts(body, line)?;
            if args.len() != 1 {
                return Err(FaultLabError::Syntax { line, msg: "expected exactly one net".into() });
            }
            let net = intern(args[0]);
            match head.to_ascii_uppercase().as_str() {
                "INPUT" => stmts.push(Stmt::Input(net)),
                "OUTPUT" => stmts.push(Stmt::Output(net)),
                _ => {
                    return Err(FaultLabError::Syntax {
                        line,
                        msg: format!("expected INPUT, OUTPUT or an assignment, found `{head}`"),
                    })
                }
            }
        }
    }

    let n = names.len();
    let mut driven = vec![false; n];
    let mut pis = Vec::new();
    let mut pos = Vec::new();
    let mut ppis = Vec::new();
    let mut ppos = Vec::new();
    let mut comb: Vec<Gate> = Vec::new();
    let claim = |net: NetId, line: usize, driven: &mut Vec<bool>| {
        if std::mem::replace(&mut driven[net], true) {
            Err(FaultLabError::MultipleDrivers { line, net: names[net].clone() })
        } else {
            Ok(())
        }
    };
    for stmt in &stmts {
        match stmt {
            Stmt::Input(net) => {
                claim(*net, 0, &mut driven)?;
                pis.push(*net);
            }
            Stmt::Output(net) => pos.push(*net),
            Stmt::Gate { line, kind, output, inputs } => {
                claim(*output, *line, &mut driven)?;
                if *kind == GateKind::Dff {
                    ppis.push(*output);
                    ppos.push(inputs[0]);
                } else {
                    comb.push(Gate { kind: *kind, inputs: inputs.clone(), output: *output });
                }
            }
        }
    }
    if let Some(net) = (0..n).find(|&net| !driven[net]) {
        return Err(FaultLabError::UndrivenNet(names[net].clone()));
    }

    // Kahn's algorithm, always releasing the earliest-declared ready gate.
    let mut gate_of = vec![None; n];
    for (i, g) in comb.iter().enumerate() {
        gate_of[g.output] = Some(i);
    }
    let mut pending: Vec<usize> = comb
        .iter()
        .map(|g| g.inputs.iter().filter(|&&i| gate_of[i].is_some()).count())
        .collect();
    let mut readers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, g) in comb.iter().enumerate() {
        for &inp in &g.inputs {
            if gate_of[inp].is_some() {
                readers[inp].push(i);
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..comb.len()).filter(|&i| pending[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(comb.len());
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &r in &readers[comb[i].output] {
            pending[r] -= 1;
            if pending[r] == 0 {
                ready.push(Reverse(r));
            }
        }
    }
    if order.len() != comb.len() {
        let stuck = (0..comb.len()).find(|&i| pending[i] > 0).expect("cycle member");
        return Err(FaultLabError::CombinationalLoop(names[comb[stuck].output].clone()));
    }
    let gates: Vec<Gate> = order.into_iter().map(|i| comb[i].clone()).collect();

    let mut driver = vec![None; n];
    let mut fanout = vec![Vec::new(); n];
    for (pos, g) in gates.iter().enumerate() {
        driver[g.output] = Some(pos);
        for &i in &g.inputs {
            if fanout[i].last() != Some(&pos) {
                fanout[i].push(pos);
            }
        }
    }

    let num_pis = pis.len();
    let num_pos = pos.len();
    let mut inputs = pis;
    inputs.extend(ppis);
    let mut outputs = pos;
    outputs.extend(ppos);

    Ok(Netlist {
        name: name.to_string(),
        net_names: names,
        inputs,
        num_pis,
        outputs,
        num_pos,
        gates,
        driver,
        fanout,
    })
}
