//! Program containers consumed by the simplex and branch-and-bound solvers.

use crate::error::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// A single linear constraint `sum(coeffs) <relation> rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Row {
            coeffs,
            relation,
            rhs,
        }
    }

    pub fn le(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Row::new(coeffs, Relation::Le, rhs)
    }

    pub fn ge(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Row::new(coeffs, Relation::Ge, rhs)
    }

    pub fn eq(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Row::new(coeffs, Relation::Eq, rhs)
    }

    /// Left-hand side value at `x`.
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A linear program with explicit variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            objective: Vec::new(),
            rows: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, row: Row) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(x))
            .fold(0.0_f64, f64::max);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(0.0))
            .fold(0.0_f64, f64::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(EngineError::Dimension(format!(
                "{} objective coefficients but {} lower / {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(EngineError::Dimension(format!(
                    "variable {j} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(EngineError::Dimension(format!(
                "objective coefficient {j} is not finite"
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            check_row(row, n).map_err(|msg| EngineError::Dimension(format!("row {i}: {msg}")))?;
        }
        Ok(())
    }
}

pub(crate) fn check_row(row: &Row, num_vars: usize) -> Result<(), String> {
    if !row.rhs.is_finite() {
        return Err(format!("right-hand side {} is not finite", row.rhs));
    }
    for &(j, a) in &row.coeffs {
        if j >= num_vars {
            return Err(format!("coefficient index {j} out of range ({num_vars} variables)"));
        }
        if !a.is_finite() {
            return Err(format!("coefficient on variable {j} is not finite"));
        }
    }
    Ok(())
}

/// Role of a variable inside a facility-location program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Y,
    X,
    W,
    U,
    C,
    Aux,
}

/// Optional naming metadata used to map solutions back to domain objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarMeta {
    pub kind: VarKind,
    pub location: Option<usize>,
    pub customer: Option<usize>,
    pub from_period: Option<usize>,
    pub period: Option<usize>,
}

impl VarMeta {
    pub fn new(kind: VarKind) -> Self {
        VarMeta {
            kind,
            location: None,
            customer: None,
            from_period: None,
            period: None,
        }
    }

    pub fn location(mut self, i: usize) -> Self {
        self.location = Some(i);
        self
    }

    pub fn customer(mut self, j: usize) -> Self {
        self.customer = Some(j);
        self
    }

    pub fn from_period(mut self, l: usize) -> Self {
        self.from_period = Some(l);
        self
    }

    pub fn period(mut self, t: usize) -> Self {
        self.period = Some(t);
        self
    }
}

/// A linear program with a subset of integer-constrained variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    pub integers: Vec<usize>,
    pub meta: Vec<VarMeta>,
}

impl MixedIntegerProgram {
    pub fn new(sense: Sense) -> Self {
        MixedIntegerProgram {
            lp: LinearProgram::new(sense),
            integers: Vec::new(),
            meta: Vec::new(),
        }
    }

    /// Adds a continuous variable.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64, meta: VarMeta) -> usize {
        let j = self.lp.add_var(cost, lower, upper);
        self.meta.push(meta);
        j
    }

    pub fn add_binary(&mut self, cost: f64, meta: VarMeta) -> usize {
        let j = self.add_var(cost, 0.0, 1.0, meta);
        self.integers.push(j);
        j
    }

    pub fn add_row(&mut self, row: Row) -> usize {
        self.lp.add_row(row)
    }

    pub fn num_vars(&self) -> usize {
        self.lp.num_vars()
    }

    /// The continuous relaxation.
    pub fn relaxation(&self) -> &LinearProgram {
        &self.lp
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.lp.validate()?;
        let n = self.lp.num_vars();
        if let Some(&j) = self.integers.iter().find(|&&j| j >= n) {
            return Err(EngineError::Dimension(format!(
                "integer variable {j} out of range ({n} variables)"
            )));
        }
        if !self.meta.is_empty() && self.meta.len() != n {
            return Err(EngineError::Dimension(format!(
                "{} metadata entries for {n} variables",
                self.meta.len()
            )));
        }
        Ok(())
    }
}
