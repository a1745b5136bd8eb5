//! Inequality audits: `lhs ≤ rhs + slack` checked along a run, with the worst
//! violation kept as data.

#[derive(Debug, Clone, PartialEq)]
pub struct Audit {
    pub name: String,
    pub slack: f64,
    pub checked: usize,
    /// Largest `lhs − rhs` seen; `-∞` before any check.
    pub max_violation: f64,
    pub worst_time: Option<f64>,
}

impl Audit {
    pub fn new(name: impl Into<String>, slack: f64) -> Self {
        Self {
            name: name.into(),
            slack,
            checked: 0,
            max_violation: f64::NEG_INFINITY,
            worst_time: None,
        }
    }

    pub fn record(&mut self, time: f64, lhs: f64, rhs: f64) {
        self.record_with_slack(time, lhs, rhs, 0.0);
    }

    /// Like [`record`](Self::record) with extra per-check slack folded into
    /// the right-hand side.
    pub fn record_with_slack(&mut self, time: f64, lhs: f64, rhs: f64, extra: f64) {
        self.checked += 1;
        let v = if lhs.is_nan() || rhs.is_nan() {
            f64::INFINITY
        } else {
            lhs - rhs - extra
        };
        if v > self.max_violation {
            self.max_violation = v;
            self.worst_time = Some(time);
        }
    }

    pub fn passed(&self) -> bool {
        self.max_violation <= self.slack
    }
}

/// `name, checked, max_violation, slack, passed` rows under schema `audits v1`.
pub fn write_audits_csv<W: std::io::Write>(w: &mut W, audits: &[Audit]) -> crate::Result<()> {
    let cols = ["name", "checked", "max_violation", "slack", "passed"].map(String::from);
    crate::csv::write_header(w, "audits v1", &cols)?;
    for a in audits {
        crate::csv::write_fields(
            w,
            &[
                a.name.clone(),
                a.checked.to_string(),
                crate::csv::fmt_f64(a.max_violation),
                crate::csv::fmt_f64(a.slack),
                u8::from(a.passed()).to_string(),
            ],
        )?;
    }
    Ok(())
}
