//! Turns a scenario source into a library [`Scenario`].

use std::fs;

use cyclefix::scenarios::{
    build_affine_regular, build_hyperbola_example, build_parabola_counterexample, build_two_set_example,
    random_shifts, Scenario, ScenarioFile,
};
use cyclefix::{ConvexSet, Error, Point, Result};

use crate::config::{BuiltinParams, RunConfig, ScenarioName, ScenarioSource};

pub const DEFAULT_AFFINE_DIM: usize = 8;
pub const DEFAULT_AFFINE_SUBSPACES: [usize; 3] = [5, 5, 5];

/// The scenario and the seed actually used: `--seed`, else the scenario
/// file's seed, else 0.
pub fn load(config: &RunConfig) -> Result<(Scenario, u64)> {
    let y0 = config.y0.clone().map(Point::new).transpose()?;
    match &config.source {
        ScenarioSource::Builtin { name, params } => {
            let seed = config.seed.unwrap_or(0);
            Ok((builtin(*name, params, y0, seed)?, seed))
        }
        ScenarioSource::File { path } => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::invalid(format!("cannot read scenario file {}: {e}", path.display())))?;
            let file: ScenarioFile = serde_json::from_str(&text)
                .map_err(|e| Error::invalid(format!("invalid scenario file {}: {e}", path.display())))?;
            let seed = config.seed.or(file.seed).unwrap_or(0);
            let mut s = file.into_scenario()?;
            if let Some(y0) = y0 {
                y0.check_dim(s.dim())?;
                s.anchor = y0;
            }
            s.seed = Some(seed);
            Ok((s, seed))
        }
    }
}

fn builtin(name: ScenarioName, p: &BuiltinParams, y0: Option<Point>, seed: u64) -> Result<Scenario> {
    let anchor = |default: &[f64]| y0.clone().map_or_else(|| Point::from_slice(default), Ok);
    match name {
        ScenarioName::Hyperbola => build_hyperbola_example(
            p.alpha.unwrap_or(0.0),
            p.beta.unwrap_or(1.0),
            p.gamma.unwrap_or(1.0),
            anchor(&[0.0, 0.0])?,
        ),
        ScenarioName::Parabola => build_parabola_counterexample(anchor(&[0.0, 1.0])?),
        ScenarioName::ParallelLines => {
            let mut s = build_two_set_example(
                ConvexSet::horizontal_line(-1.0)?,
                ConvexSet::horizontal_line(1.0)?,
                anchor(&[0.0, 1.0])?,
            )?;
            s.name = "parallel-lines".into();
            Ok(s)
        }
        ScenarioName::LineBall => {
            let mut s = build_two_set_example(
                ConvexSet::horizontal_line(0.0)?,
                ConvexSet::ball(Point::from_slice(&[1.0, 3.0])?, 1.0)?,
                anchor(&[-2.0, 0.5])?,
            )?;
            s.name = "line-ball".into();
            Ok(s)
        }
        ScenarioName::Affine => {
            let n = p.dim.unwrap_or(DEFAULT_AFFINE_DIM);
            if n == 0 {
                return Err(Error::invalid("--dim must be positive"));
            }
            let dims = p.subspace_dims.clone().unwrap_or_else(|| DEFAULT_AFFINE_SUBSPACES.to_vec());
            let scale = p.shift_scale.unwrap_or(1.0 / (n as f64).sqrt());
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(Error::invalid(format!("--shift-scale must be nonnegative, got {scale}")));
            }
            let shifts = random_shifts(n, dims.len(), scale, seed);
            let y0 = match y0 {
                Some(y) => y,
                None => random_shifts(n, 1, 1.0, seed.wrapping_add(1)).remove(0),
            };
            build_affine_regular(n, &dims, &shifts, y0, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use cyclefix::scenarios::Prediction;

    fn load_args(args: &[&str]) -> Result<(Scenario, u64)> {
        load(&parse_config(args.iter().copied()).unwrap())
    }

    #[test]
    fn builtin_defaults() {
        let (s, seed) = load_args(&["run", "--scenario", "hyperbola", "--eps", "0.5"]).unwrap();
        assert_eq!(seed, 0);
        assert_eq!(s.anchor, Point::from_slice(&[0.0, 0.0]).unwrap());
        let Prediction::Hyperbola(h) = &s.prediction else { panic!() };
        assert_eq!((h.alpha, h.beta, h.gamma), (0.0, 1.0, 1.0));
        let (s, _) = load_args(&["run", "--scenario", "parallel-lines", "--eps", "0.5"]).unwrap();
        assert_eq!(s.name, "parallel-lines");
        assert_eq!(s.m(), 2);
    }

    #[test]
    fn affine_is_seeded() {
        let a = load_args(&["run", "--scenario", "affine", "--eps", "0.5", "--seed", "3"]).unwrap().0;
        let b = load_args(&["run", "--scenario", "affine", "--eps", "0.5", "--seed", "3"]).unwrap().0;
        let c = load_args(&["run", "--scenario", "affine", "--eps", "0.5", "--seed", "4"]).unwrap().0;
        assert_eq!(a.sets, b.sets);
        assert_ne!(a.sets, c.sets);
        assert_eq!(a.dim(), 8);
        let small = load_args(&["run", "--scenario", "affine", "--eps", "0.5", "--dim", "4", "--subspace-dims", "2,3"]).unwrap().0;
        assert_eq!((small.dim(), small.m()), (4, 2));
    }

    #[test]
    fn anchor_dimension_is_checked() {
        let e = load_args(&["run", "--scenario", "parabola", "--eps", "0.5", "--y0", "1,2,3"]).unwrap_err();
        assert!(e.is_usage());
    }

    #[test]
    fn scenario_file_seed_and_anchor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        fs::write(
            &path,
            r#"{"name":"pair","sets":[{"type":"horizontal_line","level":-1},{"type":"horizontal_line","level":1}],"y0":[0,0],"seed":9}"#,
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let (s, seed) = load_args(&["run", "--scenario-file", p, "--eps", "0.5", "--y0", "3,4"]).unwrap();
        assert_eq!(seed, 9);
        assert_eq!(s.anchor, Point::from_slice(&[3.0, 4.0]).unwrap());
        let (_, seed) = load_args(&["run", "--scenario-file", p, "--eps", "0.5", "--seed", "2"]).unwrap();
        assert_eq!(seed, 2);
        assert!(load_args(&["run", "--scenario-file", "/nonexistent.json", "--eps", "0.5"]).unwrap_err().is_usage());
    }
}
