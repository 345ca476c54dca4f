//! Text format for [`PhantomSpec`].
//!
//! One `key = value` per line; `#` starts a comment. Keys:
//!
//! ```text
//! dims = 64 64 48            # nx ny nz, required
//! spacing = 1 1 1            # mm, default 1 1 1
//! background = 1.0           # required
//! noise_sigma = 0            # default 0
//! seed = 7                   # default 0
//! sphere = organ 32 20 24 9 12.0    # kind cx cy cz radius intensity
//! sphere = tumor 32 40 24 4 8.0
//! ```
//!
//! `sphere` may repeat; every other key appears at most once.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::phantom::{PhantomSpec, SphereKind, SphereSpec};
use crate::volume::{Dims, Spacing};

fn line_err(line: usize, message: impl Into<String>) -> Error {
    Error::parse(format!("line {line}"), message)
}

fn numbers<T: FromStr>(line: usize, key: &str, value: &str, count: usize) -> Result<Vec<T>> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != count {
        return Err(line_err(
            line,
            format!("`{key}` takes {count} value(s), found {}", parts.len()),
        ));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| line_err(line, format!("`{key}`: cannot parse {p:?} as a number")))
        })
        .collect()
}

fn once<T>(slot: &Option<T>, line: usize, key: &str) -> Result<()> {
    match slot {
        Some(_) => Err(line_err(line, format!("`{key}` given twice"))),
        None => Ok(()),
    }
}

pub fn parse_phantom_spec(text: &str) -> Result<PhantomSpec> {
    let mut dims = None;
    let mut spacing = None;
    let mut background = None;
    let mut noise = None;
    let mut seed = None;
    let mut spheres = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| line_err(ln, format!("expected `key = value`, found {content:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "dims" => {
                once(&dims, ln, key)?;
                let v: Vec<usize> = numbers(ln, key, value, 3)?;
                dims = Some(Dims::new(v[0], v[1], v[2]));
            }
            "spacing" => {
                once(&spacing, ln, key)?;
                let v: Vec<f64> = numbers(ln, key, value, 3)?;
                spacing = Some(Spacing::new(v[0], v[1], v[2]).map_err(|e| line_err(ln, e.to_string()))?);
            }
            "background" => {
                once(&background, ln, key)?;
                background = Some(numbers::<f32>(ln, key, value, 1)?[0]);
            }
            "noise_sigma" => {
                once(&noise, ln, key)?;
                noise = Some(numbers::<f32>(ln, key, value, 1)?[0]);
            }
            "seed" => {
                once(&seed, ln, key)?;
                seed = Some(numbers::<u64>(ln, key, value, 1)?[0]);
            }
            "sphere" => {
                let (kind, rest) = value
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| line_err(ln, "`sphere` takes a kind and 5 numbers"))?;
                let kind = match kind {
                    "organ" => SphereKind::Organ,
                    "tumor" => SphereKind::Tumor,
                    k => return Err(line_err(ln, format!("sphere kind must be organ or tumor, found {k:?}"))),
                };
                let v: Vec<f64> = numbers(ln, key, rest, 5)?;
                spheres.push((
                    ln,
                    SphereSpec {
                        center: [v[0], v[1], v[2]],
                        radius: v[3],
                        intensity: v[4] as f32,
                        kind,
                    },
                ));
            }
            k => return Err(line_err(ln, format!("unknown key {k:?}"))),
        }
    }

    let dims = dims.ok_or_else(|| Error::parse("dims", "missing required key"))?;
    let background = background.ok_or_else(|| Error::parse("background", "missing required key"))?;
    let mut spec = PhantomSpec::new(dims, background);
    spec.spacing = spacing.unwrap_or_default();
    spec.noise_sigma = noise.unwrap_or(0.0);
    spec.seed = seed.unwrap_or(0);
    for (ln, s) in &spheres {
        let single = PhantomSpec {
            spheres: vec![*s],
            ..spec.clone()
        };
        single.validate().map_err(|e| line_err(*ln, e.to_string()))?;
    }
    spec.spheres = spheres.into_iter().map(|(_, s)| s).collect();
    spec.validate()?;
    Ok(spec)
}

pub fn read_phantom_spec(path: impl AsRef<Path>) -> Result<PhantomSpec> {
    let path = path.as_ref();
    let bytes = super::read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::parse(path.display().to_string(), "not UTF-8 text"))?;
    parse_phantom_spec(&text)
}

/// Renders a spec that [`parse_phantom_spec`] reads back unchanged.
pub fn format_phantom_spec(spec: &PhantomSpec) -> String {
    let mut s = String::new();
    let d = spec.dims;
    let sp = spec.spacing;
    // `{}` on floats prints the shortest text that parses back to the same value
    let _ = writeln!(s, "dims = {} {} {}", d.nx, d.ny, d.nz);
    let _ = writeln!(s, "spacing = {} {} {}", sp.sx, sp.sy, sp.sz);
    let _ = writeln!(s, "background = {}", spec.background);
    let _ = writeln!(s, "noise_sigma = {}", spec.noise_sigma);
    let _ = writeln!(s, "seed = {}", spec.seed);
    for sph in &spec.spheres {
        let kind = match sph.kind {
            SphereKind::Organ => "organ",
            SphereKind::Tumor => "tumor",
        };
        let [x, y, z] = sph.center;
        let _ = writeln!(s, "sphere = {kind} {x} {y} {z} {} {}", sph.radius, sph.intensity);
    }
    s
}
