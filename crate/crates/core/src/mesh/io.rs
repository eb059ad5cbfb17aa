//! CSV persistence of meshes and nodal fields.
//!
//! Field files carry one row per node: `node, x, y` followed by a `_re` and
//! `_im` column for every component label.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;

use super::{DiskMesh, Field};
use crate::error::{GeoError, Result};
use crate::geometry::Region;

fn num(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn write_nodes<W: Write>(mesh: &DiskMesh, region: Region, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "x", "y", "boundary"])?;
    for (i, x) in mesh.nodes()[..mesh.node_count(region)].iter().enumerate() {
        let b = if mesh.is_boundary_node(region, i) {
            "1"
        } else {
            "0"
        };
        w.write_record(&[i.to_string(), num(x[0]), num(x[1]), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_triangles<W: Write>(mesh: &DiskMesh, region: Region, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["triangle", "a", "b", "c"])?;
    for (t, tri) in mesh.triangles()[..mesh.triangle_count(region)]
        .iter()
        .enumerate()
    {
        w.write_record(&[
            t.to_string(),
            tri[0].to_string(),
            tri[1].to_string(),
            tri[2].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn header(labels: &[&str]) -> Vec<String> {
    let mut h = vec!["node".to_string(), "x".to_string(), "y".to_string()];
    for l in labels {
        h.push(format!("{l}_re"));
        h.push(format!("{l}_im"));
    }
    h
}

pub fn write_field<const N: usize, W: Write>(
    field: &Field<N>,
    labels: &[&str; N],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(labels))?;
    let nodes = field.mesh().nodes();
    for (i, v) in field.values().iter().enumerate() {
        let mut rec = vec![i.to_string(), num(nodes[i][0]), num(nodes[i][1])];
        for z in v {
            rec.push(num(z.re));
            rec.push(num(z.im));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field`] with the same labels. Every
/// node of the region must appear exactly once.
pub fn read_field<const N: usize, R: Read>(
    mesh: &Arc<DiskMesh>,
    region: Region,
    labels: &[&str; N],
    input: R,
) -> Result<Field<N>> {
    let mut r = csv::Reader::from_reader(input);
    let expected = header(labels);
    let found: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if found != expected {
        return Err(GeoError::Io(format!(
            "unexpected header {found:?}, expected {expected:?}"
        )));
    }
    let n = mesh.node_count(region);
    let mut values = vec![[Complex64::new(0.0, 0.0); N]; n];
    let mut seen = vec![false; n];
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| GeoError::Io(format!("missing column {i}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| GeoError::Io(e.to_string()))
        };
        let i: usize = rec
            .get(0)
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|e: std::num::ParseIntError| GeoError::Io(e.to_string()))?;
        if i >= n || seen[i] {
            return Err(GeoError::Io(format!(
                "node {i} is out of range or repeated"
            )));
        }
        for (k, v) in values[i].iter_mut().enumerate() {
            *v = Complex64::new(parse(3 + 2 * k)?, parse(4 + 2 * k)?);
        }
        seen[i] = true;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(GeoError::Io(format!("node {i} missing")));
    }
    Field::from_values(mesh, region, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::mesh::{PairField, PAIR_LABELS};

    #[test]
    fn field_round_trip_is_exact() {
        let mesh = Arc::new(DiskMesh::new(0.25).unwrap());
        let f = PairField::from_fn(&mesh, Region::Inner, |x| {
            [
                c64(x[0], 1.0 / 3.0),
                c64(x[1].exp(), 0.0),
                c64(0.1, -x[0]),
                c64(1e-300, 7.0),
                c64(-2.5, x[1] * x[0]),
            ]
        });
        let mut buf = Vec::new();
        write_field(&f, &PAIR_LABELS, &mut buf).unwrap();
        let g = read_field(&mesh, Region::Inner, &PAIR_LABELS, buf.as_slice()).unwrap();
        assert_eq!(f.values(), g.values());

        let truncated: Vec<u8> = buf[..buf.len() - 40].to_vec();
        assert!(read_field(&mesh, Region::Inner, &PAIR_LABELS, truncated.as_slice()).is_err());
        assert!(read_field(&mesh, Region::Extended, &PAIR_LABELS, buf.as_slice()).is_err());
    }

    #[test]
    fn mesh_tables_have_one_row_per_entity() {
        let mesh = DiskMesh::new(0.25).unwrap();
        let mut nodes = Vec::new();
        let mut tris = Vec::new();
        write_nodes(&mesh, Region::Middle, &mut nodes).unwrap();
        write_triangles(&mesh, Region::Middle, &mut tris).unwrap();
        let lines = |b: &[u8]| String::from_utf8(b.to_vec()).unwrap().lines().count();
        assert_eq!(lines(&nodes), mesh.node_count(Region::Middle) + 1);
        assert_eq!(lines(&tris), mesh.triangle_count(Region::Middle) + 1);
    }
}
