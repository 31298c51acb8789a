//! Cluster timeline: one row per day, one column per slot, cells colored by
//! cluster id.

use std::collections::BTreeSet;
use std::fmt::Write;

use anyhow::{bail, Result};

use crate::io::Assignment;

pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub const CELL_W: usize = 24;
pub const CELL_H: usize = 18;
const LEFT: usize = 64;
const TOP: usize = 40;
const LEGEND_GAP: usize = 24;
const LEGEND_W: usize = 110;

pub fn color(cluster: usize) -> &'static str {
    PALETTE[cluster % PALETTE.len()]
}

/// Renders the timeline as a standalone SVG document. Output depends only on
/// the assignments.
pub fn timeline_svg(assignments: &[Assignment]) -> Result<String> {
    if assignments.is_empty() {
        bail!("no assignments to draw");
    }
    let days: Vec<usize> = assignments
        .iter()
        .map(|a| a.day)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let slots = assignments.iter().map(|a| a.slot).max().unwrap_or(0) + 1;
    let clusters: BTreeSet<usize> = assignments.iter().map(|a| a.cluster).collect();

    let grid_w = slots * CELL_W;
    let grid_h = days.len() * CELL_H;
    let legend_h = clusters.len() * CELL_H;
    let width = LEFT + grid_w + LEGEND_GAP + LEGEND_W;
    let height = TOP + grid_h.max(legend_h) + 40;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    )?;
    writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#)?;
    writeln!(
        s,
        r#"<text x="{}" y="14" text-anchor="middle" font-size="12">slot</text>"#,
        LEFT + grid_w / 2
    )?;
    writeln!(
        s,
        r#"<text x="12" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 12 {})">day</text>"#,
        TOP + grid_h / 2,
        TOP + grid_h / 2
    )?;
    for slot in 0..slots {
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{slot}</text>"#,
            LEFT + slot * CELL_W + CELL_W / 2,
            TOP - 6
        )?;
    }
    for (row, day) in days.iter().enumerate() {
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{day}</text>"#,
            LEFT - 6,
            TOP + row * CELL_H + CELL_H / 2 + 4
        )?;
    }

    let mut cells: Vec<&Assignment> = assignments.iter().collect();
    cells.sort_by_key(|a| (a.day, a.slot, a.sequence_index));
    for a in cells {
        let row = days.binary_search(&a.day).expect("day collected above");
        writeln!(
            s,
            r#"<rect class="cell" x="{}" y="{}" width="{CELL_W}" height="{CELL_H}" fill="{}" stroke="white" stroke-width="1"><title>day {} slot {} cluster {}</title></rect>"#,
            LEFT + a.slot * CELL_W,
            TOP + row * CELL_H,
            color(a.cluster),
            a.day,
            a.slot,
            a.cluster
        )?;
    }

    let lx = LEFT + grid_w + LEGEND_GAP;
    for (i, c) in clusters.iter().enumerate() {
        let y = TOP + i * CELL_H;
        writeln!(
            s,
            r#"<rect class="legend" x="{lx}" y="{y}" width="12" height="12" fill="{}"/>"#,
            color(*c)
        )?;
        writeln!(s, r#"<text x="{}" y="{}">cluster {c}</text>"#, lx + 18, y + 10)?;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(days: usize, slots: usize, f: impl Fn(usize, usize) -> usize) -> Vec<Assignment> {
        let mut v = Vec::new();
        for d in 0..days {
            for s in 0..slots {
                v.push(Assignment {
                    sequence_index: v.len(),
                    day: d,
                    slot: s,
                    cluster: f(d, s),
                });
            }
        }
        v
    }

    fn cells(svg: &str) -> Vec<(usize, usize, String)> {
        svg.lines()
            .filter(|l| l.contains(r#"class="cell""#))
            .map(|l| {
                let attr = |name: &str| {
                    let start = l.find(&format!(" {name}=\"")).unwrap() + name.len() + 3;
                    l[start..start + l[start..].find('"').unwrap()].to_string()
                };
                (attr("x").parse().unwrap(), attr("y").parse().unwrap(), attr("fill"))
            })
            .collect()
    }

    #[test]
    fn small_grid_colors_by_column() {
        let svg = timeline_svg(&grid(2, 3, |_, s| usize::from(s == 2))).unwrap();
        let c = cells(&svg);
        assert_eq!(c.len(), 6);
        let colors: BTreeSet<&str> = c.iter().map(|x| x.2.as_str()).collect();
        assert_eq!(colors.len(), 2);
        for (x, _, fill) in &c {
            let slot = (x - LEFT) / CELL_W;
            assert_eq!(fill, color(usize::from(slot == 2)));
        }
        assert!(svg.contains(">slot<") && svg.contains(">day<") && svg.contains("cluster 1"));
    }

    #[test]
    fn output_is_deterministic() {
        let a = grid(3, 4, |d, s| (d + s) % 3);
        assert_eq!(timeline_svg(&a).unwrap(), timeline_svg(&a).unwrap());
        let mut shuffled = a.clone();
        shuffled.reverse();
        assert_eq!(timeline_svg(&a).unwrap(), timeline_svg(&shuffled).unwrap());
    }

    #[test]
    fn full_test_grid_has_no_overlap() {
        let svg = timeline_svg(&grid(15, 24, |d, s| (d * 7 + s) % 5)).unwrap();
        let c = cells(&svg);
        assert_eq!(c.len(), 360);
        let mut seen = BTreeSet::new();
        for (x, y, _) in &c {
            assert_eq!((x - LEFT) % CELL_W, 0);
            assert_eq!((y - TOP) % CELL_H, 0);
            assert!(seen.insert((*x, *y)), "two cells at {x},{y}");
        }
        let width: usize = svg
            .split("width=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        let max_x = c.iter().map(|t| t.0).max().unwrap() + CELL_W;
        assert!(max_x + LEGEND_GAP + LEGEND_W <= width);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(timeline_svg(&[]).is_err());
    }
}
