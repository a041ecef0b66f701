use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::report::Report;

/// Pretty JSON with every float written at 17 significant digits.
struct Precise<'a>(PrettyFormatter<'a>);

impl Formatter for Precise<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report serializes");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.10}"))
}

/// Human-readable summary. The JSON report is the stable interface.
pub fn to_text(r: &Report) -> String {
    let mut s = String::new();
    let m = &r.moments;
    let _ = writeln!(s, "{} {}", r.tool.name, r.tool.version);
    let _ = writeln!(
        s,
        "input      {} ({}x{}, data total {}, prior {}, n = {})",
        r.input.path,
        r.input.r,
        r.input.s,
        r.input.data_total,
        r.input.prior.name(),
        r.input.n
    );
    let _ = writeln!(s, "I(q_hat)   {:.10}", r.point_stats.j);
    let _ = writeln!(s, "mean       {:.10}   (expansion {:.10})", m.mean_exact, m.mean_o2);
    let _ = writeln!(s, "var_o1     {:.10}", m.var_o1);
    let _ = writeln!(s, "var_o2     {}", opt(m.var_o2));
    let _ = writeln!(s, "variance   {:.10}   (order {})", r.variance.value, r.variance.order);
    let _ = writeln!(s, "sd         {:.10}", r.variance.value.max(0.0).sqrt());
    let _ = writeln!(s, "skewness   {}", opt(m.skewness));
    let _ = writeln!(s, "kurtosis   {}", opt(m.kurtosis));
    let _ = writeln!(s, "I_max      {:.10}", m.i_max);
    for f in &r.fits {
        let _ = writeln!(s, "fit        {}", f.fit.family);
        let _ = writeln!(s, "  params   {}", serde_json::to_string(&f.fit.params).unwrap_or_default());
        if let Some(mass) = f.fit.diagnostics.mass_above_i_max {
            let _ = writeln!(s, "  p(I > I_max) = {mass:.3e}");
        }
        for t in &f.tails {
            let _ = writeln!(s, "  p(I > {}) = {:.10}", t.threshold, t.survival);
        }
        if let Some(d) = f.mc_histogram_distance {
            let _ = writeln!(s, "  distance to MC histogram (TV) = {d:.4}");
        }
    }
    if let Some(mc) = &r.mc {
        let _ = writeln!(s, "monte carlo  N = {}, seed = {}", mc.samples, mc.seed);
        for (name, e) in [
            ("mean", mc.mean),
            ("variance", mc.variance),
            ("skewness", mc.skewness),
            ("kurtosis", mc.kurtosis),
        ] {
            let _ = writeln!(s, "  {name:<9}{:.10} ± {:.2e}", e.value, e.se);
        }
        for t in &mc.tails {
            let _ = writeln!(s, "  p(I > {}) = {:.6}", t.threshold, t.frequency);
        }
    }
    s
}
