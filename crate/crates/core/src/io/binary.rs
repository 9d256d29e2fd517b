//! Raw binary dumps: depth maps (`WDEP`) and occupancy grids (`WOCC`).
//! All integers and floats are little-endian.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{create, open, IoError};
use crate::gs_init::DepthMap;
use crate::recon::OccupancyGrid;

pub const DEPTH_MAGIC: &[u8; 4] = b"WDEP";
pub const GRID_MAGIC: &[u8; 4] = b"WOCC";
pub const GRID_VERSION: u32 = 1;

fn read_array<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N], IoError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => IoError::Format(format!("file ends inside {what}")),
        _ => e.into(),
    })?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32, IoError> {
    Ok(u32::from_le_bytes(read_array(r, what)?))
}

fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64, IoError> {
    Ok(f64::from_le_bytes(read_array(r, what)?))
}

/// 16-byte header (`WDEP`, width u32, height u32, sentinel f32), then row-major f32 depths.
pub fn write_depth<W: Write>(mut w: W, depth: &DepthMap) -> Result<(), IoError> {
    let mut out = Vec::with_capacity(16 + 4 * depth.data().len());
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&(depth.width() as u32).to_le_bytes());
    out.extend_from_slice(&(depth.height() as u32).to_le_bytes());
    out.extend_from_slice(&depth.sentinel().to_le_bytes());
    for v in depth.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&out)?;
    w.flush()?;
    Ok(())
}

pub fn read_depth<R: Read>(mut r: R) -> Result<DepthMap, IoError> {
    if &read_array::<4, _>(&mut r, "the magic")? != DEPTH_MAGIC {
        return Err(IoError::Format("not a depth file (bad magic)".into()));
    }
    let width = read_u32(&mut r, "the header")? as usize;
    let height = read_u32(&mut r, "the header")? as usize;
    let sentinel = f32::from_le_bytes(read_array(&mut r, "the header")?);
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 4 * width * height {
        return Err(IoError::Format(format!(
            "depth body has {} bytes, expected {}",
            body.len(),
            4 * width * height
        )));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    DepthMap::from_raw(width, height, sentinel, data).map_err(|e| IoError::Invalid(e.to_string()))
}

/// `WOCC`, version u32, dims 3 x u32, origin 3 x f64, voxel size f64, then the
/// occupancy bitmap in storage order (x fastest), least significant bit first.
pub fn write_grid<W: Write>(mut w: W, grid: &OccupancyGrid) -> Result<(), IoError> {
    let mut out = Vec::new();
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    for d in grid.dims {
        let d = u32::try_from(d).map_err(|_| IoError::Invalid("grid dimension exceeds u32".into()))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for a in 0..3 {
        out.extend_from_slice(&grid.origin[a].to_le_bytes());
    }
    out.extend_from_slice(&grid.voxel_size.to_le_bytes());
    let mut bits = vec![0u8; grid.occupied.len().div_ceil(8)];
    for (i, _) in grid.occupied.iter().enumerate().filter(|(_, &o)| o) {
        bits[i / 8] |= 1 << (i % 8);
    }
    out.extend_from_slice(&bits);
    w.write_all(&out)?;
    w.flush()?;
    Ok(())
}

pub fn read_grid<R: Read>(mut r: R) -> Result<OccupancyGrid, IoError> {
    if &read_array::<4, _>(&mut r, "the magic")? != GRID_MAGIC {
        return Err(IoError::Format("not a grid file (bad magic)".into()));
    }
    let version = read_u32(&mut r, "the header")?;
    if version != GRID_VERSION {
        return Err(IoError::Unsupported(format!("grid version {version}")));
    }
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        *d = read_u32(&mut r, "the header")? as usize;
    }
    let mut origin = Vector3::zeros();
    for a in 0..3 {
        origin[a] = read_f64(&mut r, "the header")?;
    }
    let voxel_size = read_f64(&mut r, "the header")?;
    if !(voxel_size > 0.0) {
        return Err(IoError::Format(format!("voxel size {voxel_size} is not positive")));
    }
    let n = dims[0] * dims[1] * dims[2];
    let mut bits = Vec::new();
    r.read_to_end(&mut bits)?;
    if bits.len() != n.div_ceil(8) {
        return Err(IoError::Format(format!("bitmap has {} bytes, expected {}", bits.len(), n.div_ceil(8))));
    }
    let occupied = (0..n).map(|i| bits[i / 8] >> (i % 8) & 1 == 1).collect();
    Ok(OccupancyGrid { origin, voxel_size, dims, occupied })
}

pub fn load_depth(path: &Path) -> Result<DepthMap, IoError> {
    read_depth(open(path)?)
}

pub fn save_depth(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    write_depth(create(path)?, depth)
}

pub fn load_grid(path: &Path) -> Result<OccupancyGrid, IoError> {
    read_grid(open(path)?)
}

pub fn save_grid(path: &Path, grid: &OccupancyGrid) -> Result<(), IoError> {
    write_grid(create(path)?, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_layout() {
        let d = DepthMap::from_raw(2, 1, 0.0, vec![0.0, 2.5]).unwrap();
        let mut buf = Vec::new();
        write_depth(&mut buf, &d).unwrap();
        assert_eq!(buf.len(), 24);
        assert_eq!(&buf[..4], b"WDEP");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[20..24], &2.5f32.to_le_bytes());
        assert_eq!(read_depth(buf.as_slice()).unwrap(), d);
        assert!(read_depth(&buf[..20]).is_err());
    }

    #[test]
    fn grid_round_trip() {
        let mut g = OccupancyGrid::empty(Vector3::new(-1.0, 0.5, 2.0), 0.1, [3, 2, 2]);
        g.set(0, 0, 0, true);
        g.set(2, 1, 1, true);
        let mut buf = Vec::new();
        write_grid(&mut buf, &g).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 12 + 24 + 8 + 2);
        assert_eq!(buf[52], 1);
        assert_eq!(buf[53], 1 << 3);
        assert_eq!(read_grid(buf.as_slice()).unwrap(), g);
    }
}
