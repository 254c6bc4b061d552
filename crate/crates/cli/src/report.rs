//! Report serialization. All floating-point output is printed with 17
//! significant digits (`{:.16e}`) so every value round-trips exactly and
//! golden files stay byte-stable.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use covmatch_core::prob::WorldModel;
use covmatch_core::sim::SimReport;

/// Pretty JSON with scientific-notation floats at 17 significant digits.
pub struct SciPretty<'a> {
    inner: PrettyFormatter<'a>,
}

impl SciPretty<'_> {
    pub fn new() -> Self {
        SciPretty {
            inner: PrettyFormatter::new(),
        }
    }
}

impl Formatter for SciPretty<'_> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{}", fmt_float17(value))
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_array(writer)
    }

    fn end_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object(writer)
    }

    fn end_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_object_value(writer)
    }
}

/// 17 significant digits, scientific notation. Enough to reconstruct any
/// f64 bit-for-bit.
pub fn fmt_float17(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciPretty::new());
    value
        .serialize(&mut ser)
        .expect("report serialization cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// The model's probability components after exact renormalization, reported
/// separately from the values as parsed.
#[derive(Debug, Serialize)]
pub struct NormalizedModel {
    pub probe_prior: Vec<f64>,
    pub imposter_prior: Vec<f64>,
    pub probe_channel: Vec<Vec<f64>>,
    pub gallery_channel: Vec<Vec<f64>>,
}

impl NormalizedModel {
    pub fn from_model(model: &WorldModel) -> Self {
        NormalizedModel {
            probe_prior: model.probe_prior().probs().to_vec(),
            imposter_prior: model.imposter_prior().probs().to_vec(),
            probe_channel: model.probe_channel().rows().to_vec(),
            gallery_channel: model.gallery_channel().rows().to_vec(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimReportJson {
    pub estimate: f64,
    pub trials: u64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_ci: Option<bool>,
}

impl From<&SimReport> for SimReportJson {
    fn from(r: &SimReport) -> Self {
        SimReportJson {
            estimate: r.estimate,
            trials: r.trials,
            std_error: r.std_error,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            analytic: r.analytic,
            within_ci: r.within_ci,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float17_round_trips() {
        for v in [0.0, 0.25, 1.0 / 3.0, 0.1 + 0.2, 1e-300, 123456.789] {
            let s = fmt_float17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn floats_serialize_in_scientific_notation() {
        #[derive(Serialize)]
        struct T {
            x: f64,
        }
        let s = to_json_string(&T { x: 0.25 });
        assert!(s.contains("2.5000000000000000e-1"), "{s}");
        // And it parses back as JSON.
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["x"].as_f64().unwrap(), 0.25);
    }
}
