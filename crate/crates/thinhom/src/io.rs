//! Output writers: legacy ASCII VTK for triangle and hexahedron fields,
//! CSV tables and pretty JSON. Every writer takes a one-line provenance
//! stamp that ends up in the file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::direct3d::HexMesh3D;
use crate::meshfem::TriMesh2D;
use crate::{Error, Result};

/// VTK hexahedron corner order from the lattice corner order of [`HexMesh3D`].
const VTK_HEX: [usize; 8] = [0, 1, 3, 2, 4, 5, 7, 6];

fn check_fields(n: usize, fields: &[(&str, &[f64])]) -> Result<()> {
    for (name, values) in fields {
        if values.len() != n {
            return Err(Error::InvalidInput(format!(
                "field '{name}' has {} values for {n} points",
                values.len()
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidInput(format!("invalid VTK field name '{name}'")));
        }
    }
    Ok(())
}

fn point_data(out: &mut String, n: usize, fields: &[(&str, &[f64])]) {
    if fields.is_empty() {
        return;
    }
    let _ = writeln!(out, "POINT_DATA {n}");
    for (name, values) in fields {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in *values {
            let _ = writeln!(out, "{v:e}");
        }
    }
}

fn header(out: &mut String, stamp: &str) {
    out.push_str("# vtk DataFile Version 3.0\n");
    // the title line may not contain newlines and is cut at 256 characters
    let title: String = stamp.replace(['\n', '\r'], " ").chars().take(255).collect();
    let _ = writeln!(out, "{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
}

/// Triangle mesh in the plane `z = 0` with nodal fields.
pub fn vtk_triangles(mesh: &TriMesh2D, fields: &[(&str, &[f64])], stamp: &str) -> Result<String> {
    check_fields(mesh.n_nodes(), fields)?;
    let mut out = String::new();
    header(&mut out, stamp);
    let _ = writeln!(out, "POINTS {} double", mesh.n_nodes());
    for p in &mesh.nodes {
        let _ = writeln!(out, "{:e} {:e} 0", p[0], p[1]);
    }
    let nt = mesh.n_triangles();
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
    point_data(&mut out, mesh.n_nodes(), fields);
    Ok(out)
}

/// Hexahedral mesh with nodal fields.
pub fn vtk_hexahedra(mesh: &HexMesh3D, fields: &[(&str, &[f64])], stamp: &str) -> Result<String> {
    check_fields(mesh.n_nodes(), fields)?;
    let mut out = String::new();
    header(&mut out, stamp);
    let _ = writeln!(out, "POINTS {} double", mesh.n_nodes());
    for n in 0..mesh.n_nodes() {
        let p = mesh.coords(n);
        let _ = writeln!(out, "{:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    let ne = mesh.n_elements();
    let _ = writeln!(out, "CELLS {ne} {}", 9 * ne);
    for e in 0..ne {
        let nodes = mesh.element_nodes(e);
        out.push('8');
        for k in VTK_HEX {
            let _ = write!(out, " {}", nodes[k]);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {ne}");
    for _ in 0..ne {
        out.push_str("12\n");
    }
    point_data(&mut out, mesh.n_nodes(), fields);
    Ok(out)
}

/// CSV text behind a `# stamp` comment line.
pub fn csv_with_stamp(stamp: &str, body: &str) -> String {
    format!("# {}\n{body}", stamp.replace(['\n', '\r'], " "))
}

/// Nodal field as CSV rows `x1,x2,<name>`.
pub fn nodal_csv(mesh: &TriMesh2D, name: &str, values: &[f64]) -> Result<String> {
    check_fields(mesh.n_nodes(), &[(name, values)])?;
    let mut out = format!("x1,x2,{name}\n");
    for (p, v) in mesh.nodes.iter().zip(values) {
        let _ = writeln!(out, "{},{},{}", p[0], p[1], v);
    }
    Ok(out)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshfem::rectangle_mesh;
    use crate::Rect;

    #[test]
    fn triangle_vtk_layout() {
        let mesh = rectangle_mesh(&Rect::unit(), 2, 2).unwrap();
        let values: Vec<f64> = mesh.nodes.iter().map(|p| p[0] + p[1]).collect();
        let s = vtk_triangles(&mesh, &[("u", &values)], "stamp").unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[1], "stamp");
        assert!(s.contains(&format!("POINTS {} double", mesh.n_nodes())));
        assert!(s.contains(&format!("CELLS {} {}", mesh.n_triangles(), 4 * mesh.n_triangles())));
        assert!(s.contains("SCALARS u double 1"));
        assert_eq!(s.lines().filter(|l| *l == "5").count(), mesh.n_triangles());
    }

    #[test]
    fn field_length_mismatch_rejected() {
        let mesh = rectangle_mesh(&Rect::unit(), 2, 2).unwrap();
        assert!(vtk_triangles(&mesh, &[("u", &[1.0])], "s").is_err());
        assert!(nodal_csv(&mesh, "u", &[1.0]).is_err());
    }

    #[test]
    fn hexahedron_order_has_positive_volume() {
        let mesh = HexMesh3D {
            x1: vec![0.0, 1.0],
            x2: vec![0.0, 1.0],
            nz: 1,
            top: vec![1.0; 4],
        };
        let s = vtk_hexahedra(&mesh, &[], "s").unwrap();
        let cell = s.lines().find(|l| l.starts_with("8 ")).unwrap();
        let ids: Vec<usize> = cell.split(' ').skip(1).map(|t| t.parse().unwrap()).collect();
        let p: Vec<[f64; 3]> = ids.iter().map(|&n| mesh.coords(n)).collect();
        // VTK order: bottom face counter-clockwise seen from above, then the top face
        let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        let (u, v, w) = (sub(p[1], p[0]), sub(p[3], p[0]), sub(p[4], p[0]));
        let det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0]) + u[2] * (v[0] * w[1] - v[1] * w[0]);
        assert!(det > 0.0);
        assert_eq!(p[2], [1.0, 1.0, 0.0]);
    }

    #[test]
    fn csv_stamp_is_a_comment_line() {
        assert_eq!(csv_with_stamp("a\nb", "x\n1\n"), "# a b\nx\n1\n");
    }
}
