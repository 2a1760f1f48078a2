use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{
    condition_bounds, convergence_threshold_paper, fp_error_constants, iteration_bound, widening_budget,
    widening_coefficient, CertifyError,
};
use crate::linalg::DenseVector;

/// Soft value attached to a certificate next to the hard fields.
#[derive(Debug, Clone, PartialEq)]
pub enum NoteValue {
    Number(f64),
    Integer(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for NoteValue {
    fn from(x: f64) -> Self {
        NoteValue::Number(x)
    }
}

impl From<i64> for NoteValue {
    fn from(x: i64) -> Self {
        NoteValue::Integer(x)
    }
}

impl From<bool> for NoteValue {
    fn from(x: bool) -> Self {
        NoteValue::Bool(x)
    }
}

impl From<&str> for NoteValue {
    fn from(x: &str) -> Self {
        NoteValue::Text(x.to_string())
    }
}

impl From<String> for NoteValue {
    fn from(x: String) -> Self {
        NoteValue::Text(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateInputs {
    pub n: usize,
    pub r: f64,
    pub big_r: f64,
    pub v: f64,
    pub epsilon: f64,
    pub lambda: f64,
    /// Center of the initial ball.
    pub z_bar2: DenseVector,
    /// `‖x_c‖`, the norm of the enclosing-ball center.
    pub x_c_norm: f64,
}

/// Every a-priori quantity the solver relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub n: usize,
    pub r: f64,
    pub big_r: f64,
    pub v: f64,
    pub epsilon: f64,
    pub z_bar2: DenseVector,
    pub big_n: u64,
    pub lambda: f64,
    pub n_lambda_paper: Option<u64>,
    pub n_lambda_safe: Option<u64>,
    pub sigma_min_floor: f64,
    pub sigma_max_cap: f64,
    pub cond_bound: f64,
    pub norm_b_bound: f64,
    pub norm_c_bound: f64,
    pub e_b: f64,
    pub e_c: f64,
    pub lambda_convergent: bool,
    pub notes: BTreeMap<String, NoteValue>,
}

impl Certificate {
    /// Derives all bounds from `(n, r, R, V, ε, λ)`. The worst-case `λ`
    /// implied by the bounds and the safe-budget verdict go to the notes.
    pub fn assemble(inp: &CertificateInputs) -> Result<Self, CertifyError> {
        for (name, x) in [("r", inp.r), ("R", inp.big_r), ("V", inp.v), ("epsilon", inp.epsilon)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(CertifyError::InvalidInput(format!("{name} must be positive, got {x}")));
            }
        }
        if inp.z_bar2.len() != inp.n {
            return Err(CertifyError::Dimension(format!("z_bar2 has length {}, n = {}", inp.z_bar2.len(), inp.n)));
        }
        let n = inp.n;
        let big_n = iteration_bound(n, inp.r, inp.big_r, inp.v, inp.epsilon);
        let wb = widening_budget(n, big_n, inp.lambda)?;
        let cb = condition_bounds(n, inp.r, inp.big_r, inp.v, inp.epsilon, inp.x_c_norm);
        let (e_b, e_c) = fp_error_constants(n, cb.norm_b_bound, cb.norm_c_bound);
        let worst = widening_coefficient(n, cb.cond_bound, cb.norm_b_bound, e_b, e_c);
        let mut notes = BTreeMap::new();
        notes.insert("lambda_convergent_safe".to_string(), NoteValue::Bool(wb.convergent_safe));
        notes.insert("lambda_threshold_paper".to_string(), NoteValue::Number(convergence_threshold_paper(n)));
        notes.insert("lambda_worst_case".to_string(), NoteValue::Number(worst));
        notes.insert(
            "lambda_worst_case_convergent_paper".to_string(),
            NoteValue::Bool(worst < convergence_threshold_paper(n)),
        );
        Ok(Self {
            n,
            r: inp.r,
            big_r: inp.big_r,
            v: inp.v,
            epsilon: inp.epsilon,
            z_bar2: inp.z_bar2.clone(),
            big_n,
            lambda: inp.lambda,
            n_lambda_paper: wb.n_lambda_paper,
            n_lambda_safe: wb.n_lambda_safe,
            sigma_min_floor: cb.sigma_min_floor,
            sigma_max_cap: cb.sigma_max_cap,
            cond_bound: cb.cond_bound,
            norm_b_bound: cb.norm_b_bound,
            norm_c_bound: cb.norm_c_bound,
            e_b,
            e_c,
            lambda_convergent: wb.convergent_paper,
            notes,
        })
    }

    pub fn note(&mut self, key: &str, value: impl Into<NoteValue>) {
        self.notes.insert(key.to_string(), value.into());
    }

    /// Deterministic JSON: sorted keys, floats with 17 significant digits.
    pub fn to_json(&self) -> String {
        let opt = |x: Option<u64>| x.map_or_else(|| "null".to_string(), |v| v.to_string());
        let mut fields: BTreeMap<&str, String> = BTreeMap::new();
        fields.insert("n", self.n.to_string());
        fields.insert("r", format_f64(self.r));
        fields.insert("big_r", format_f64(self.big_r));
        fields.insert("v", format_f64(self.v));
        fields.insert("epsilon", format_f64(self.epsilon));
        fields.insert(
            "z_bar2",
            format!("[{}]", self.z_bar2.iter().map(|&x| format_f64(x)).collect::<Vec<_>>().join(", ")),
        );
        fields.insert("big_n", self.big_n.to_string());
        fields.insert("lambda", format_f64(self.lambda));
        fields.insert("n_lambda_paper", opt(self.n_lambda_paper));
        fields.insert("n_lambda_safe", opt(self.n_lambda_safe));
        fields.insert("sigma_min_floor", format_f64(self.sigma_min_floor));
        fields.insert("sigma_max_cap", format_f64(self.sigma_max_cap));
        fields.insert("cond_bound", format_f64(self.cond_bound));
        fields.insert("norm_b_bound", format_f64(self.norm_b_bound));
        fields.insert("norm_c_bound", format_f64(self.norm_c_bound));
        fields.insert("e_b", format_f64(self.e_b));
        fields.insert("e_c", format_f64(self.e_c));
        fields.insert("lambda_convergent", self.lambda_convergent.to_string());
        let mut notes = String::from("{");
        for (i, (k, v)) in self.notes.iter().enumerate() {
            let sep = if i == 0 { "\n" } else { ",\n" };
            let _ = write!(notes, "{sep}    {}: {}", quote(k), note_json(v));
        }
        notes.push_str(if self.notes.is_empty() { "}" } else { "\n  }" });
        fields.insert("notes", notes);
        let mut out = String::from("{\n");
        let body: Vec<String> = fields.iter().map(|(k, v)| format!("  {}: {}", quote(k), v)).collect();
        out.push_str(&body.join(",\n"));
        out.push_str("\n}\n");
        out
    }
}

fn note_json(v: &NoteValue) -> String {
    match v {
        NoteValue::Number(x) => format_f64(*x),
        NoteValue::Integer(i) => i.to_string(),
        NoteValue::Bool(b) => b.to_string(),
        NoteValue::Text(s) => quote(s),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// 17 significant digits with trailing zeros dropped; plain notation for
/// exponents in `[-5, 17)`, scientific otherwise. Non-finite values become `null`.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    if x == 0.0 {
        return "0.0".to_string();
    }
    let sci = format!("{:.16e}", x.abs());
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if x < 0.0 { "-" } else { "" };
    if (0..17).contains(&exp) {
        let e = exp as usize;
        let padded = format!("{digits:0<width$}", width = e + 1);
        let (int, frac) = padded.split_at(e + 1);
        let frac = if frac.is_empty() { "0" } else { frac };
        format!("{sign}{int}.{frac}")
    } else if (-5..0).contains(&exp) {
        format!("{sign}0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else {
        let (head, tail) = digits.split_at(1);
        let tail = if tail.is_empty() { "0" } else { tail };
        format!("{sign}{head}.{tail}e{exp}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heli_inputs() -> CertificateInputs {
        CertificateInputs {
            n: 16,
            r: 8.0612,
            big_r: 322.0,
            v: 162.0,
            epsilon: 0.25,
            lambda: 1.000695409372118,
            z_bar2: DenseVector::zeros(16),
            x_c_norm: 0.0,
        }
    }

    #[test]
    fn float_format() {
        assert_eq!(format_f64(0.25), "0.25");
        assert_eq!(format_f64(322.0), "322.0");
        assert_eq!(format_f64(-1.5e-3), "-0.0015");
        assert_eq!(format_f64(1e20), "1.0e20");
        assert_eq!(format_f64(0.1), "0.10000000000000001");
        for x in [1.000695409372118, 8.537e5, 1.2345678901234567e-300, std::f64::consts::PI] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn helicopter_certificate() {
        let c = Certificate::assemble(&heli_inputs()).unwrap();
        assert_eq!(c.big_n, 5528);
        assert_eq!(c.n_lambda_paper, Some(6817));
        assert!(c.lambda_convergent);
        let json = c.to_json();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["n"], 16);
        assert_eq!(parsed["epsilon"], 0.25);
        assert_eq!(parsed["big_n"], 5528);
        assert_eq!(parsed["n_lambda_paper"], 6817);
        assert!(json.contains("\"epsilon\": 0.25"));
        assert_eq!(json, Certificate::assemble(&heli_inputs()).unwrap().to_json());
        let keys: Vec<&String> = parsed.as_object().unwrap().keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn unit_lambda_budget_equals_bound() {
        let mut inp = heli_inputs();
        inp.lambda = 1.0;
        let c = Certificate::assemble(&inp).unwrap();
        assert_eq!(c.n_lambda_paper, Some(c.big_n));
        assert_eq!(c.n_lambda_safe, Some(c.big_n));
    }
}
