//! Flat `section.key=value` configuration shared by every command.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ksk_core::levy::LevyKernel;
use ksk_core::simulate::SmallJumpScheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Eval,
    Grid,
    Simulate,
    Bounds,
    Verify,
    Figure,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Eval,
        Command::Grid,
        Command::Simulate,
        Command::Bounds,
        Command::Verify,
        Command::Figure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Grid => "grid",
            Command::Simulate => "simulate",
            Command::Bounds => "bounds",
            Command::Verify => "verify",
            Command::Figure => "figure",
        }
    }
}

impl FromStr for Command {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UsageError(format!("unknown command '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub struct KeySpec {
    pub key: &'static str,
    pub flag: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn k(key: &'static str, flag: &'static str, default: Option<&'static str>, help: &'static str) -> KeySpec {
    KeySpec { key, flag, default, help }
}

pub const KEYS: &[KeySpec] = &[
    k("kernel.d", "d", Some("1"), "spatial dimension"),
    k("kernel.alpha", "alpha", Some("1.5"), "stability index in (0,2)"),
    k("kernel.kappa", "kappa", Some("constant"), "constant | anisotropic-even | nonsymmetric"),
    k("kernel.kappa0", "kappa0", Some("1"), "lower bound of kappa; the constant value for `constant`"),
    k("kernel.kappa1", "kappa1", None, "upper bound of kappa (checked against the kernel)"),
    k("run.t", "t", Some("1"), "time"),
    k("run.seed", "seed", Some("0"), "random seed"),
    k("run.out", "out", Some("out"), "output directory"),
    k("run.threads", "threads", None, "worker threads (fallback: KSK_THREADS)"),
    k("eval.z", "z", Some("0,0"), "phase point x1..xd,v1..vd"),
    k("eval.jx", "jx", Some("0"), "x derivative order"),
    k("eval.jv", "jv", Some("0"), "v derivative order"),
    k("grid.nodes", "nodes", Some("1024,512"), "nodes per axis (x axes then v axes)"),
    k("grid.extent", "extent", Some("32,16"), "half extent per axis"),
    k("grid.tail_tol", "tail-tol", Some("1e-8"), "largest admissible |e^-phi| on the frequency box"),
    k("grid.format", "format", Some("both"), "csv | binary | both"),
    k("simulate.paths", "paths", Some("1"), "number of paths"),
    k("simulate.epsilon", "epsilon", Some("0.01"), "small-jump cutoff"),
    k("simulate.scheme", "scheme", Some("gaussian"), "gaussian | truncate | euler:M"),
    k("bounds.z", "bz", Some("3,1"), "phase point for the bound evaluation"),
    k("bounds.beta", "beta", None, "exponent (default d + alpha)"),
    k("bounds.q", "q", Some("1"), "moment order"),
    k("verify.suite", "suite", Some("all"), "all or a comma list of check names"),
    k("verify.quick", "quick", Some("false"), "reduced budgets"),
    k("figure.kind", "kind", Some("envelope"), "envelope | path"),
    k("figure.window", "window", Some("20,8"), "plotted half extents |x|,|v|"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Default,
    File,
    Flag,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::File => "file",
            Source::Flag => "flag",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<&'static str, (String, Source)>,
}

fn known(key: &str) -> Result<&'static KeySpec, UsageError> {
    KEYS.iter()
        .find(|s| s.key == key)
        .ok_or_else(|| UsageError(format!("unknown key '{key}'")))
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, UsageError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("line {}: expected key=value", i + 1)))?;
        let key = k.trim();
        known(key).map_err(|e| UsageError(format!("line {}: {e}", i + 1)))?;
        out.push((key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Defaults, then file entries, then flags.
    pub fn build(command: Command, file: &[(String, String)], flags: &[(String, String)]) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        for s in KEYS {
            if let Some(d) = s.default {
                values.insert(s.key, (d.to_string(), Source::Default));
            }
        }
        for (layer, src) in [(file, Source::File), (flags, Source::Flag)] {
            for (k, v) in layer {
                let spec = known(k)?;
                values.insert(spec.key, (v.clone(), src));
            }
        }
        let cfg = Self { command, values };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, UsageError> {
        let raw = self
            .raw(key)
            .ok_or_else(|| UsageError(format!("missing value for {key}")))?;
        raw.parse()
            .map_err(|_| UsageError(format!("cannot parse {key}='{raw}'")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, UsageError> {
        match self.raw(key) {
            None => Ok(None),
            Some(_) => self.get(key).map(Some),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, UsageError> {
        let raw = self.raw(key).unwrap_or("");
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| UsageError(format!("cannot parse {key}='{raw}'")))
            })
            .collect()
    }

    pub fn d(&self) -> usize {
        self.get("kernel.d").expect("validated")
    }

    pub fn alpha(&self) -> f64 {
        self.get("kernel.alpha").expect("validated")
    }

    pub fn t(&self) -> f64 {
        self.get("run.t").expect("validated")
    }

    pub fn seed(&self) -> u64 {
        self.get("run.seed").expect("validated")
    }

    fn validate(&self) -> Result<(), UsageError> {
        let d: usize = self.get("kernel.d")?;
        if d == 0 {
            return Err(UsageError("d must be at least 1".into()));
        }
        let alpha: f64 = self.get("kernel.alpha")?;
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(UsageError("alpha must lie in (0,2)".into()));
        }
        let t: f64 = self.get("run.t")?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(UsageError("t must be positive".into()));
        }
        let k0: f64 = self.get("kernel.kappa0")?;
        if !(k0 > 0.0 && k0.is_finite()) {
            return Err(UsageError("kappa0 must be positive".into()));
        }
        if let Some(k1) = self.get_opt::<f64>("kernel.kappa1")? {
            if k0 > k1 {
                return Err(UsageError("kappa0 must not exceed kappa1".into()));
            }
        }
        let _: u64 = self.get("run.seed")?;
        if let Some(n) = self.get_opt::<usize>("run.threads")? {
            if n == 0 {
                return Err(UsageError("threads must be at least 1".into()));
            }
        }
        self.scheme()?;
        self.get::<bool>("verify.quick")?;
        let z: Vec<f64> = self.list("eval.z")?;
        if self.command == Command::Eval && z.len() != 2 * d {
            return Err(UsageError(format!("z needs {} coordinates for d={d}", 2 * d)));
        }
        let z: Vec<f64> = self.list("bounds.z")?;
        if self.command == Command::Bounds && z.len() != 2 * d {
            return Err(UsageError(format!("bounds.z needs {} coordinates for d={d}", 2 * d)));
        }
        match self.raw("grid.format") {
            Some("csv" | "binary" | "both") => {}
            other => return Err(UsageError(format!("unknown grid format {other:?}"))),
        }
        match self.raw("figure.kind") {
            Some("envelope" | "path") => {}
            other => return Err(UsageError(format!("unknown figure kind {other:?}"))),
        }
        Ok(())
    }

    pub fn scheme(&self) -> Result<SmallJumpScheme, UsageError> {
        let raw = self.raw("simulate.scheme").unwrap_or("gaussian");
        match raw {
            "gaussian" => Ok(SmallJumpScheme::GaussianCompensate),
            "truncate" => Ok(SmallJumpScheme::Truncate),
            s => s
                .strip_prefix("euler:")
                .and_then(|m| m.parse().ok())
                .filter(|m: &usize| *m > 0)
                .map(SmallJumpScheme::EulerMesh)
                .ok_or_else(|| UsageError(format!("unknown scheme '{s}'"))),
        }
    }

    /// The kernel named by `kernel.kappa`, rescaled so its lower bound is `kappa0`.
    pub fn kernel(&self) -> Result<LevyKernel, UsageError> {
        let name = self.raw("kernel.kappa").unwrap_or("constant");
        let k0: f64 = self.get("kernel.kappa0")?;
        let base = LevyKernel::builtin(name, self.d(), self.alpha()).map_err(|e| UsageError(e.to_string()))?;
        let k = base
            .scaled(k0 / base.kappa_bounds().0)
            .map_err(|e| UsageError(e.to_string()))?;
        if let Some(k1) = self.get_opt::<f64>("kernel.kappa1")? {
            let upper = k.kappa_bounds().1;
            if (k1 - upper).abs() > 1e-12 * upper {
                return Err(UsageError(format!(
                    "kernel '{name}' with kappa0={k0} has kappa1={upper}, not {k1}"
                )));
            }
        }
        Ok(k)
    }

    /// Header block: version, command and every effective key with its source.
    pub fn header(&self, prefix: &str) -> String {
        let mut s = format!("{prefix}ksk {}\n{prefix}command: {}\n", env!("CARGO_PKG_VERSION"), self.command.as_str());
        for (k, (v, _)) in &self.values {
            s.push_str(&format!("{prefix}{k}={v}\n"));
        }
        let src: Vec<String> = self
            .values
            .iter()
            .filter(|(_, (_, s))| *s != Source::Default)
            .map(|(k, (_, s))| format!("{k}:{}", s.as_str()))
            .collect();
        s.push_str(&format!(
            "{prefix}overrides: {}\n",
            if src.is_empty() { "none".to_string() } else { src.join(" ") }
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn flag_beats_file() {
        let file = parse_config_text("kernel.alpha = 1.2 # comment\n\nrun.seed=4\n").unwrap();
        let cfg = RunConfig::build(Command::Eval, &file, &flags(&[("kernel.alpha", "0.7")])).unwrap();
        assert_eq!(cfg.alpha(), 0.7);
        assert_eq!(cfg.seed(), 4);
        let h = cfg.header("# ");
        assert!(h.contains("# kernel.alpha=0.7\n"));
        assert!(h.contains("kernel.alpha:flag"));
        assert!(h.contains("run.seed:file"));
    }

    #[test]
    fn header_reproduces_config() {
        let cfg = RunConfig::build(Command::Grid, &[], &flags(&[("run.t", "0.5"), ("grid.nodes", "64,32")])).unwrap();
        // key lines of a header form a config file; the other lines carry no '='
        let text: String = cfg
            .header("")
            .lines()
            .filter(|l| l.contains('='))
            .map(|l| format!("{l}\n"))
            .collect();
        let back = RunConfig::build(Command::Grid, &parse_config_text(&text).unwrap(), &[]).unwrap();
        assert_eq!(back.t(), 0.5);
        assert_eq!(back.list::<usize>("grid.nodes").unwrap(), vec![64, 32]);
        let body = |c: &RunConfig| c.header("").lines().filter(|l| l.contains('=')).collect::<Vec<_>>().join("\n");
        assert_eq!(body(&back), body(&cfg));
    }

    #[test]
    fn rejections() {
        let bad = |pairs: &[(&str, &str)]| RunConfig::build(Command::Eval, &[], &flags(pairs)).unwrap_err().0;
        assert_eq!(bad(&[("kernel.alpha", "2.5")]), "alpha must lie in (0,2)");
        assert_eq!(bad(&[("kernel.alpha", "0")]), "alpha must lie in (0,2)");
        assert!(bad(&[("kernel.kappa0", "2"), ("kernel.kappa1", "1")]).contains("kappa0"));
        assert!(bad(&[("eval.z", "1,2,3")]).contains("coordinates"));
        assert!(bad(&[("simulate.scheme", "euler:0")]).contains("scheme"));
        assert!(bad(&[("kernel.nope", "1")]).contains("unknown key"));
        assert!(parse_config_text("kernel.beta=3").unwrap_err().0.contains("unknown key"));
        assert!(parse_config_text("alpha 1").is_err());
        assert!("plot".parse::<Command>().is_err());
    }

    #[test]
    fn kernel_scaling_and_bounds() {
        let cfg = RunConfig::build(
            Command::Eval,
            &[],
            &flags(&[("kernel.kappa", "anisotropic-even"), ("kernel.kappa0", "2"), ("kernel.kappa1", "3.5")]),
        )
        .unwrap();
        assert_eq!(cfg.kernel().unwrap().kappa_bounds(), (2.0, 3.5));
        let cfg = RunConfig::build(Command::Eval, &[], &flags(&[("kernel.kappa1", "2")])).unwrap();
        assert!(cfg.kernel().is_err());
        assert_eq!(cfg.scheme().unwrap(), SmallJumpScheme::GaussianCompensate);
    }
}
