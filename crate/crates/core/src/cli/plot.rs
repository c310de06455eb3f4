//! Static SVG rendering of a solved curve.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::rate::RateFit;
use crate::spectrum::SpectrumCurve;

/// File name written inside the plot directory.
pub const PLOT_FILE: &str = "spectrum.svg";

/// Two panels in `dir/spectrum.svg`: `b` against `log10 alpha` with the `b*`
/// asymptote, and `log10(b* - b)` against `log10 alpha` with the fitted line.
pub fn emit_plots(curve: &SpectrumCurve, fit: Option<&RateFit>, dir: &Path) -> Result<PathBuf> {
    if curve.points.len() < 2 {
        return Err(Error::EmptyPlot(format!(
            "{} solved points, need at least 2",
            curve.points.len()
        )));
    }
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(PLOT_FILE);
    draw(curve, fit, &path).map_err(|e| Error::Output {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    info!("plot={}", path.display());
    Ok(path)
}

type DrawResult = std::result::Result<(), Box<dyn std::error::Error>>;

fn padded(lo: f64, hi: f64) -> std::ops::Range<f64> {
    let pad = ((hi - lo) * 0.05).max(1e-12);
    (lo - pad)..(hi + pad)
}

fn draw(curve: &SpectrumCurve, fit: Option<&RateFit>, path: &Path) -> DrawResult {
    let b_star = curve.b_star;
    let la: Vec<f64> = curve.points.iter().map(|p| p.alpha.log10()).collect();
    let (x0, x1) = (la[0], *la.last().unwrap());
    let root = SVGBackend::new(path, (1200, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let (left, right) = root.split_horizontally(600);

    let bs: Vec<f64> = curve.points.iter().map(|p| p.b).collect();
    let ylo = bs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut c = ChartBuilder::on(&left)
        .caption(format!("b(alpha), b* = {b_star:.6}"), ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(padded(x0, x1), padded(ylo, b_star))?;
    c.configure_mesh().x_desc("log10 alpha").y_desc("b").draw()?;
    c.draw_series(LineSeries::new(vec![(x0, b_star), (x1, b_star)], RED.stroke_width(1)))?;
    c.draw_series(LineSeries::new(la.iter().cloned().zip(bs.iter().cloned()), &BLUE))?;
    c.draw_series(la.iter().zip(&bs).map(|(&x, &y)| Circle::new((x, y), 2, BLUE.filled())))?;

    let gaps: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| b_star - p.b > 0.0)
        .map(|p| (p.alpha.log10(), (b_star - p.b).log10()))
        .collect();
    if gaps.len() >= 2 {
        let glo = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        let ghi = gaps.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
        let caption = match fit {
            Some(f) if f.theoretical.is_finite() => {
                format!("fitted {:.2} vs theory {:.2}", -f.fitted_exponent, -f.theoretical)
            }
            Some(f) => format!("fitted {:.2}", -f.fitted_exponent),
            None => "log10(b* - b)".to_string(),
        };
        let mut c = ChartBuilder::on(&right)
            .caption(caption, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(64)
            .build_cartesian_2d(padded(gaps[0].0, gaps.last().unwrap().0), padded(glo, ghi))?;
        c.configure_mesh().x_desc("log10 alpha").y_desc("log10(b* - b)").draw()?;
        c.draw_series(gaps.iter().map(|&(x, y)| Circle::new((x, y), 2, BLUE.filled())))?;
        if let Some(f) = fit {
            // anchor the fitted slope at the window's last point
            let (w0, w1) = (f.window.0.log10(), f.window.1.log10());
            if let Some(&(xa, ya)) = gaps.iter().rev().find(|g| g.0 <= w1 + 1e-9) {
                let s = -f.fitted_exponent;
                c.draw_series(LineSeries::new(
                    vec![(w0, ya + s * (w0 - xa)), (xa, ya)],
                    RED.stroke_width(2),
                ))?;
            }
        }
    }
    root.present()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{geometric_grid, solve_curve};
    use crate::systems::descriptor::SystemSpec;

    #[test]
    fn writes_svg_and_rejects_empty_curves() {
        let dir = std::env::temp_dir().join(format!("birkhoff-plot-{}", std::process::id()));
        let s = SystemSpec::new("lueroth").build().unwrap();
        let c = solve_curve(&s, &geometric_grid(1e2, 1e4, 9).unwrap(), 1e-10).unwrap();
        let fit = crate::rate::fit_rate_exponent(&c, c.b_star, Some((1e2, 1e4)), Some(0.5)).unwrap();
        let p = emit_plots(&c, Some(&fit), &dir).unwrap();
        let svg = fs::read_to_string(&p).unwrap();
        assert!(svg.starts_with("<svg") || svg.contains("<svg"));
        assert!(svg.contains("fitted -1.0"), "caption missing");
        fs::remove_dir_all(&dir).ok();

        let empty = SpectrumCurve {
            grid: vec![1.0, 2.0],
            points: vec![],
            b_star: 1.0,
            failures: vec![(1.0, "x".into()), (2.0, "y".into())],
        };
        let dir2 = dir.with_extension("empty");
        assert!(matches!(emit_plots(&empty, None, &dir2), Err(Error::EmptyPlot(_))));
        assert!(!dir2.join(PLOT_FILE).exists());
    }
}
