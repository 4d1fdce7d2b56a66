//! Decimated simulation log and its CSV form.

use std::io::{self, BufRead, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::frames::{ComplexSample, ThreePhase};

/// One logged instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub t: f64,
    pub v_c1: f64,
    pub v_c1_ref: f64,
    pub i_l: ComplexSample,
    pub v_c2: ComplexSample,
    pub i_g: ComplexSample,
    pub v_g: ComplexSample,
    pub mu_abc: ThreePhase,
    pub p_i: f64,
    pub p: f64,
    pub q: f64,
    pub q_ref: f64,
    pub e1: Complex64,
    pub e2: Complex64,
    pub e3: Complex64,
    pub xi1: Complex64,
    pub xi2: Complex64,
    pub xi3: Complex64,
    pub w: Complex64,
    pub y: Complex64,
    pub q_int: f64,
    /// Cumulative number of integration steps with a guard trip.
    pub guard_count: u64,
}

/// Column names with units, in CSV order.
pub const COLUMNS: [&str; 40] = [
    "t_s",
    "v_c1_V",
    "v_c1_ref_V",
    "i_l_alpha_A",
    "i_l_beta_A",
    "v_c2_alpha_V",
    "v_c2_beta_V",
    "i_g_alpha_A",
    "i_g_beta_A",
    "v_g_alpha_V",
    "v_g_beta_V",
    "mu_a",
    "mu_b",
    "mu_c",
    "p_i_W",
    "p_W",
    "q_var",
    "q_ref_var",
    "e_xi1_re_J",
    "e_xi1_im_J",
    "e_xi2_re_W",
    "e_xi2_im_var",
    "e_xi3_re_W_per_s",
    "e_xi3_im_var_per_s",
    "xi1_re_J",
    "xi1_im_J",
    "xi2_re_W",
    "xi2_im_var",
    "xi3_re_W_per_s",
    "xi3_im_var_per_s",
    "w_re_W_per_s2",
    "w_im_var_per_s2",
    "y_re_J_s",
    "y_im_J_s",
    "q_int_J",
    "guard_count",
    // trailing magnitudes make the CSV easier to eyeball
    "i_g_mag_A",
    "v_c2_mag_V",
    "i_l_mag_A",
    "mu_peak_phase",
];

impl Sample {
    fn fields(&self) -> [f64; COLUMNS.len()] {
        [
            self.t,
            self.v_c1,
            self.v_c1_ref,
            self.i_l.re,
            self.i_l.im,
            self.v_c2.re,
            self.v_c2.im,
            self.i_g.re,
            self.i_g.im,
            self.v_g.re,
            self.v_g.im,
            self.mu_abc.a,
            self.mu_abc.b,
            self.mu_abc.c,
            self.p_i,
            self.p,
            self.q,
            self.q_ref,
            self.e1.re,
            self.e1.im,
            self.e2.re,
            self.e2.im,
            self.e3.re,
            self.e3.im,
            self.xi1.re,
            self.xi1.im,
            self.xi2.re,
            self.xi2.im,
            self.xi3.re,
            self.xi3.im,
            self.w.re,
            self.w.im,
            self.y.re,
            self.y.im,
            self.q_int,
            self.guard_count as f64,
            self.i_g.norm(),
            self.v_c2.norm(),
            self.i_l.norm(),
            self.mu_abc.max_abs(),
        ]
    }

    fn from_fields(f: &[f64]) -> Self {
        let c = |i: usize| Complex64::new(f[i], f[i + 1]);
        Self {
            t: f[0],
            v_c1: f[1],
            v_c1_ref: f[2],
            i_l: c(3),
            v_c2: c(5),
            i_g: c(7),
            v_g: c(9),
            mu_abc: ThreePhase::new(f[11], f[12], f[13]),
            p_i: f[14],
            p: f[15],
            q: f[16],
            q_ref: f[17],
            e1: c(18),
            e2: c(20),
            e3: c(22),
            xi1: c(24),
            xi2: c(26),
            xi3: c(28),
            w: c(30),
            y: c(32),
            q_int: f[34],
            guard_count: f[35] as u64,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("CSV header does not match the expected columns")]
    Header,
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse `{text}` as a number")]
    Number { line: usize, text: String },
}

/// Logged samples in increasing time order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeriesRecord {
    pub samples: Vec<Sample>,
}

impl TimeSeriesRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// Samples with `t0 <= t <= t1`.
    pub fn window(&self, t0: f64, t1: f64) -> &[Sample] {
        let a = self.samples.partition_point(|s| s.t < t0);
        let b = self.samples.partition_point(|s| s.t <= t1);
        &self.samples[a..b.max(a)]
    }

    /// Rust's shortest round-trip float formatting keeps the file lossless.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", COLUMNS.join(","))?;
        let mut line = String::with_capacity(COLUMNS.len() * 24);
        for s in &self.samples {
            line.clear();
            for (i, v) in s.fields().iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                use std::fmt::Write as _;
                write!(line, "{v}").expect("writing to a String cannot fail");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, CsvError> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.ok_or(CsvError::Header)?;
        if header.trim_end() != COLUMNS.join(",") {
            return Err(CsvError::Header);
        }
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields = line
                .split(',')
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| CsvError::Number {
                        line: i + 2,
                        text: f.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if fields.len() != COLUMNS.len() {
                return Err(CsvError::FieldCount {
                    line: i + 2,
                    expected: COLUMNS.len(),
                    found: fields.len(),
                });
            }
            samples.push(Sample::from_fields(&fields));
        }
        Ok(Self { samples })
    }
}
