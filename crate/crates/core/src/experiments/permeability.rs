use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::BuiltinField;
use crate::error::{Error, Result};
use crate::fem::{FineMesh, PermeabilityField};

/// Channels and blocky inclusions of value `contrast` in a unit background.
/// Sizes are in mesh squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    #[serde(default)]
    pub horizontal_channels: usize,
    #[serde(default)]
    pub vertical_channels: usize,
    #[serde(default)]
    pub inclusions: usize,
    #[serde(default = "default_width")]
    pub channel_width: usize,
    /// Channel length as a fraction of the domain side, in `(0, 1]`.
    #[serde(default = "default_length")]
    pub channel_length: f64,
    #[serde(default = "default_width")]
    pub inclusion_size: usize,
    /// Overrides the experiment seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_width() -> usize {
    2
}
fn default_length() -> f64 {
    1.0
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channel_width == 0 || self.inclusion_size == 0 {
            return Err(Error::input("channel width and inclusion size must be >= 1"));
        }
        if !(self.channel_length > 0.0 && self.channel_length <= 1.0) {
            return Err(Error::input(format!(
                "channel length must lie in (0, 1], got {}",
                self.channel_length
            )));
        }
        Ok(())
    }
}

/// Deterministic in `(spec, mesh, contrast, seed)`.
pub fn generate_permeability(
    spec: &GeneratorSpec,
    mesh: &FineMesh,
    contrast: f64,
    seed: u64,
) -> Result<PermeabilityField> {
    spec.validate()?;
    if !(contrast >= 1.0) || !contrast.is_finite() {
        return Err(Error::input(format!("contrast must be finite and >= 1, got {contrast}")));
    }
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let mut squares = vec![1.0; nx * ny];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.unwrap_or(seed));
    let mut fill = |i0: usize, i1: usize, j0: usize, j1: usize| {
        for j in j0..j1.min(ny) {
            for i in i0..i1.min(nx) {
                squares[j * nx + i] = contrast;
            }
        }
    };
    // Offset of a band of `len` squares in `0..n`, away from the boundary
    // when there is room.
    let place = |rng: &mut ChaCha8Rng, n: usize, len: usize| -> usize {
        let len = len.min(n);
        let (lo, hi) = if n >= len + 2 { (1, n - len - 1) } else { (0, n - len) };
        rng.gen_range(lo..=hi)
    };
    let w = spec.channel_width;
    for _ in 0..spec.horizontal_channels {
        let j = place(&mut rng, ny, w);
        let len = ((spec.channel_length * nx as f64).round() as usize).clamp(1, nx);
        let i = rng.gen_range(0..=nx - len);
        fill(i, i + len, j, j + w);
    }
    for _ in 0..spec.vertical_channels {
        let i = place(&mut rng, nx, w);
        let len = ((spec.channel_length * ny as f64).round() as usize).clamp(1, ny);
        let j = rng.gen_range(0..=ny - len);
        fill(i, i + w, j, j + len);
    }
    let s = spec.inclusion_size;
    for _ in 0..spec.inclusions {
        let i = place(&mut rng, nx, s);
        let j = place(&mut rng, ny, s);
        fill(i, i + s, j, j + s);
    }
    PermeabilityField::from_square_values(mesh, &squares)
}

/// Parse a raster (`nx ny` header, then one positive value per pixel,
/// row-major from the bottom row). Each pixel covers a whole block of mesh
/// squares.
pub fn parse_raster(text: &str, mesh: &FineMesh) -> Result<PermeabilityField> {
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::input(format!("raster is missing its {what} dimension")))?
            .parse::<usize>()
            .map_err(|e| Error::input(format!("raster {what} dimension: {e}")))
    };
    let (rx, ry) = (dim("x")?, dim("y")?);
    if rx == 0 || ry == 0 || mesh.nx() % rx != 0 || mesh.ny() % ry != 0 {
        return Err(Error::input(format!(
            "raster of {rx}x{ry} pixels does not divide the {}x{} mesh",
            mesh.nx(),
            mesh.ny()
        )));
    }
    let pixels: Vec<f64> = tokens
        .map(|t| t.parse::<f64>().map_err(|e| Error::input(format!("raster value `{t}`: {e}"))))
        .collect::<Result<_>>()?;
    if pixels.len() != rx * ry {
        return Err(Error::input(format!(
            "raster header announces {} values, found {}",
            rx * ry,
            pixels.len()
        )));
    }
    if let Some(v) = pixels.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::input(format!("raster values must be positive, found {v}")));
    }
    let (bx, by) = (mesh.nx() / rx, mesh.ny() / ry);
    let squares: Vec<f64> = (0..mesh.ny())
        .flat_map(|j| (0..mesh.nx()).map(move |i| (i, j)))
        .map(|(i, j)| pixels[(j / by) * rx + i / bx])
        .collect();
    PermeabilityField::from_square_values(mesh, &squares)
}

pub fn load_permeability(path: &Path, mesh: &FineMesh) -> Result<PermeabilityField> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_raster(&text, mesh).map_err(|e| e.context(format!("raster {}", path.display())))
}

/// One value per mesh square, in the raster layout.
pub fn format_raster(field: &PermeabilityField, mesh: &FineMesh) -> String {
    let mut out = format!("{} {}\n", mesh.nx(), mesh.ny());
    for j in 0..mesh.ny() {
        let row: Vec<String> = (0..mesh.nx())
            .map(|i| field.values()[2 * (j * mesh.nx() + i)].to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn builtin_raster(name: BuiltinField) -> &'static str {
    match name {
        BuiltinField::Linear => include_str!("../../data/kappa_linear.txt"),
        BuiltinField::Semilinear => include_str!("../../data/kappa_semilinear.txt"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_structured_mesh;

    #[test]
    fn uniform_raster() {
        let mesh = build_structured_mesh(4, 6).unwrap();
        let k = parse_raster("2 3\n1 1\n1 1\n1 1\n", &mesh).unwrap();
        assert!(k.values().iter().all(|&v| v == 1.0));
        assert_eq!(k.contrast(), 1.0);
    }

    #[test]
    fn raster_layout_bottom_row_first() {
        let mesh = build_structured_mesh(4, 2).unwrap();
        let k = parse_raster("2 2\n1 2\n3 4\n", &mesh).unwrap();
        // Square (i, j) = (3, 0) lies under pixel (1, 0); (0, 1) under (0, 1).
        let sq = |i: usize, j: usize| k.values()[2 * (j * 4 + i)];
        assert_eq!(sq(3, 0), 2.0);
        assert_eq!(sq(0, 1), 3.0);
        assert_eq!(k.values()[2 * 7 + 1], 4.0);
        assert_eq!(parse_raster(&format_raster(&k, &mesh), &mesh).unwrap(), k);
    }

    #[test]
    fn raster_errors() {
        let mesh = build_structured_mesh(4, 4).unwrap();
        assert!(parse_raster("3 2\n1 1 1 1 1 1", &mesh).is_err());
        assert!(parse_raster("2 2\n1 1 1", &mesh).is_err());
        assert!(parse_raster("2 2\n1 1 1 0", &mesh).is_err());
        assert!(parse_raster("2 2\n1 1 1 x", &mesh).is_err());
        assert!(parse_raster("", &mesh).is_err());
    }

    #[test]
    fn generator_properties() {
        let mesh = build_structured_mesh(20, 20).unwrap();
        let empty = GeneratorSpec {
            horizontal_channels: 0,
            vertical_channels: 0,
            inclusions: 0,
            channel_width: 2,
            channel_length: 1.0,
            inclusion_size: 2,
            seed: None,
        };
        let k = generate_permeability(&empty, &mesh, 1e4, 3).unwrap();
        assert!(k.values().iter().all(|&v| v == 1.0));

        let spec = GeneratorSpec { horizontal_channels: 2, vertical_channels: 1, inclusions: 3, ..empty };
        let a = generate_permeability(&spec, &mesh, 1e4, 3).unwrap();
        let b = generate_permeability(&spec, &mesh, 1e4, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.kappa_max(), 1e4);
        assert_eq!(a.kappa_min(), 1.0);
        // Both triangles of a square agree.
        assert!(a.values().chunks(2).all(|p| p[0] == p[1]));
        let c = generate_permeability(&spec, &mesh, 1e4, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn builtin_rasters_fit_the_reference_mesh() {
        let mesh = build_structured_mesh(100, 100).unwrap();
        for name in [BuiltinField::Linear, BuiltinField::Semilinear] {
            let k = parse_raster(builtin_raster(name), &mesh).unwrap();
            assert_eq!(k.kappa_min(), 1.0);
            assert_eq!(k.kappa_max(), 1e4);
        }
    }
}
