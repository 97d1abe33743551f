//! 2-D scalar grids: probability masks, binary masks, and image channels.
//!
//! Pixel (0, 0) is the top-left corner; rows grow toward smaller world y.
//! `origin` is the world position of the grid's top-left corner, so the
//! center of pixel (row, col) sits at
//! `(origin.x + (col + 0.5)·res, origin.y − (row + 0.5)·res)`.
//!
//! Grids persist as binary PGM (P5, 16-bit) with `resolution` and `origin`
//! carried in comment lines; 3-channel imagery uses the same scheme as PPM
//! (P6, 16-bit). Both round-trip bit-exactly.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::geom::Point;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major scalar grid with world georeferencing.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    width: usize,
    height: usize,
    /// Meters per pixel.
    pub resolution: f64,
    /// World coordinates of the top-left corner.
    pub origin: Point,
    values: Vec<f64>,
}

impl RasterGrid {
    pub fn zeros(width: usize, height: usize, resolution: f64, origin: Point) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        RasterGrid { width, height, resolution, origin, values: vec![0.0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    /// World position of the center of pixel (row, col).
    pub fn pixel_center(&self, row: usize, col: usize) -> Point {
        Point::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y - (row as f64 + 0.5) * self.resolution,
        )
    }

    /// Fractional pixel coordinates (col, row) of a world point.
    pub fn world_to_pixel(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.origin.x) / self.resolution - 0.5,
            (self.origin.y - p.y) / self.resolution - 0.5,
        )
    }

    /// Bilinear sample at a world point; outside the grid reads as 0.
    pub fn sample(&self, p: Point) -> f64 {
        let (cx, ry) = self.world_to_pixel(p);
        let c0 = cx.floor();
        let r0 = ry.floor();
        let fx = cx - c0;
        let fy = ry - r0;
        let mut acc = 0.0;
        for (dr, dc, w) in [
            (0.0, 0.0, (1.0 - fx) * (1.0 - fy)),
            (0.0, 1.0, fx * (1.0 - fy)),
            (1.0, 0.0, (1.0 - fx) * fy),
            (1.0, 1.0, fx * fy),
        ] {
            let r = r0 + dr;
            let c = c0 + dc;
            if r >= 0.0 && c >= 0.0 && (r as usize) < self.height && (c as usize) < self.width {
                acc += w * self.get(r as usize, c as usize);
            }
        }
        acc
    }

    pub fn fill(&mut self, mut f: impl FnMut(usize, usize) -> f64) {
        for row in 0..self.height {
            for col in 0..self.width {
                self.set(row, col, f(row, col));
            }
        }
    }

    pub fn map_values(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.values {
            *v = f(*v);
        }
    }

    pub fn count_set(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    /// Draw the segment (a, b) as an anti-aliased one-pixel line.
    ///
    /// Pixel coverage is a tent over perpendicular distance: 1 on the
    /// segment, 0 at one pixel away. Values combine with existing ink by
    /// max, so overlapping edges stay in [0, 1] and the summed ink of a
    /// lone segment approximates its pixel length at any angle.
    pub fn draw_segment_aa(&mut self, a: Point, b: Point) {
        let (ax, ay) = self.world_to_pixel(a);
        let (bx, by) = self.world_to_pixel(b);
        let min_c = (ax.min(bx) - 1.5).floor().max(0.0) as i64;
        let max_c = (ax.max(bx) + 1.5).ceil().min(self.width as f64 - 1.0) as i64;
        let min_r = (ay.min(by) - 1.5).floor().max(0.0) as i64;
        let max_r = (ay.max(by) + 1.5).ceil().min(self.height as f64 - 1.0) as i64;
        if min_c > max_c || min_r > max_r {
            return;
        }
        let pa = Point::new(ax, ay);
        let pb = Point::new(bx, by);
        for r in min_r..=max_r {
            for c in min_c..=max_c {
                let p = Point::new(c as f64, r as f64);
                let d = crate::geom::point_segment_distance(p, pa, pb);
                let cover = 1.0 - d;
                if cover > 0.0 {
                    let idx = r as usize * self.width + c as usize;
                    if cover > self.values[idx] {
                        self.values[idx] = cover;
                    }
                }
            }
        }
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(
            w,
            "P5\n# resolution {}\n# origin {} {}\n{} {}\n65535\n",
            self.resolution, self.origin.x, self.origin.y, self.width, self.height
        )?;
        let mut buf = Vec::with_capacity(self.values.len() * 2);
        for &v in &self.values {
            buf.extend_from_slice(&quantize16(v).to_be_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_pgm<R: BufRead>(mut r: R) -> Result<Self, RasterError> {
        let header = PnmHeader::parse(&mut r, "P5")?;
        let mut buf = vec![0u8; header.width * header.height * 2];
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
            .collect();
        Ok(RasterGrid {
            width: header.width,
            height: header.height,
            resolution: header.resolution,
            origin: header.origin,
            values,
        })
    }

    pub fn write_pgm_file(&self, path: &std::path::Path) -> std::io::Result<()> {
        self.write_pgm(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_pgm_file(path: &std::path::Path) -> Result<Self, RasterError> {
        Self::read_pgm(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Three aligned channels forming the imagery input of a decision window.
#[derive(Debug, Clone, PartialEq)]
pub struct Imagery {
    pub channels: [RasterGrid; 3],
}

impl Imagery {
    pub fn new(channels: [RasterGrid; 3]) -> Self {
        let (w, h) = (channels[0].width, channels[0].height);
        assert!(
            channels.iter().all(|c| c.width == w && c.height == h),
            "imagery channels must share dimensions"
        );
        Imagery { channels }
    }

    /// All-zero imagery covering nothing; samples read as 0 everywhere.
    pub fn blank() -> Self {
        let z = || RasterGrid::zeros(1, 1, 1.0, Point::new(0.0, 0.0));
        Imagery { channels: [z(), z(), z()] }
    }

    pub fn write_ppm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let c0 = &self.channels[0];
        write!(
            w,
            "P6\n# resolution {}\n# origin {} {}\n{} {}\n65535\n",
            c0.resolution, c0.origin.x, c0.origin.y, c0.width, c0.height
        )?;
        let mut buf = Vec::with_capacity(c0.values.len() * 6);
        for i in 0..c0.values.len() {
            for ch in &self.channels {
                buf.extend_from_slice(&quantize16(ch.values[i]).to_be_bytes());
            }
        }
        w.write_all(&buf)
    }

    pub fn read_ppm<R: BufRead>(mut r: R) -> Result<Self, RasterError> {
        let header = PnmHeader::parse(&mut r, "P6")?;
        let n = header.width * header.height;
        let mut buf = vec![0u8; n * 6];
        r.read_exact(&mut buf)?;
        let mut channels = [(); 3].map(|_| {
            RasterGrid::zeros(header.width, header.height, header.resolution, header.origin)
        });
        for i in 0..n {
            for (ch, channel) in channels.iter_mut().enumerate() {
                let o = i * 6 + ch * 2;
                channel.values[i] = u16::from_be_bytes([buf[o], buf[o + 1]]) as f64 / 65535.0;
            }
        }
        Ok(Imagery { channels })
    }

    pub fn write_ppm_file(&self, path: &std::path::Path) -> std::io::Result<()> {
        self.write_ppm(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_ppm_file(path: &std::path::Path) -> Result<Self, RasterError> {
        Self::read_ppm(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

struct PnmHeader {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point,
}

impl PnmHeader {
    /// Parse a P5/P6 header with our metadata comments. Tokens may be
    /// separated by any whitespace; `#` comments run to end of line.
    fn parse<R: BufRead>(r: &mut R, magic: &str) -> Result<PnmHeader, RasterError> {
        let mut resolution = None;
        let mut origin = None;
        let mut tokens: Vec<String> = Vec::new();

        // Read header bytes one line at a time; the binary payload starts
        // after the single whitespace byte following maxval.
        while tokens.len() < 4 {
            let mut line = Vec::new();
            let n = read_header_line(r, &mut line)?;
            if n == 0 {
                return Err(RasterError::Parse("truncated header".into()));
            }
            let text = String::from_utf8_lossy(&line);
            let text = text.trim_end_matches(['\n', '\r']);
            if let Some(comment) = text.trim_start().strip_prefix('#') {
                let fields: Vec<&str> = comment.split_whitespace().collect();
                match fields.first() {
                    Some(&"resolution") if fields.len() == 2 => {
                        resolution = fields[1].parse::<f64>().ok();
                    }
                    Some(&"origin") if fields.len() == 3 => {
                        if let (Ok(x), Ok(y)) = (fields[1].parse(), fields[2].parse()) {
                            origin = Some(Point::new(x, y));
                        }
                    }
                    _ => {}
                }
                continue;
            }
            tokens.extend(text.split_whitespace().map(str::to_string));
        }

        if tokens.len() != 4 || tokens[0] != magic {
            return Err(RasterError::Parse(format!("expected {magic} header")));
        }
        let width: usize =
            tokens[1].parse().map_err(|_| RasterError::Parse("bad width".into()))?;
        let height: usize =
            tokens[2].parse().map_err(|_| RasterError::Parse("bad height".into()))?;
        if tokens[3] != "65535" {
            return Err(RasterError::Parse("only 16-bit maxval supported".into()));
        }
        let resolution =
            resolution.ok_or_else(|| RasterError::Parse("missing `# resolution` comment".into()))?;
        let origin =
            origin.ok_or_else(|| RasterError::Parse("missing `# origin` comment".into()))?;
        Ok(PnmHeader { width, height, resolution, origin })
    }
}

fn read_header_line<R: BufRead>(r: &mut R, out: &mut Vec<u8>) -> std::io::Result<usize> {
    let mut byte = [0u8; 1];
    let mut n = 0;
    loop {
        match r.read(&mut byte)? {
            0 => return Ok(n),
            _ => {
                n += 1;
                if byte[0] == b'\n' {
                    return Ok(n);
                }
                out.push(byte[0]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_coordinate_round_trip() {
        let g = RasterGrid::zeros(10, 8, 0.5, Point::new(100.0, 200.0));
        let p = g.pixel_center(3, 7);
        let (cx, ry) = g.world_to_pixel(p);
        assert!((cx - 7.0).abs() < 1e-12);
        assert!((ry - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pgm_round_trip_is_bit_exact() {
        let mut g = RasterGrid::zeros(13, 7, 0.6, Point::new(-4.25, 31.5));
        g.fill(|r, c| ((r * 31 + c * 7) % 97) as f64 / 96.0);
        let mut bytes = Vec::new();
        g.write_pgm(&mut bytes).unwrap();
        let back = RasterGrid::read_pgm(&bytes[..]).unwrap();
        let mut bytes2 = Vec::new();
        back.write_pgm(&mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
        assert_eq!(back.resolution, 0.6);
        assert_eq!(back.origin, Point::new(-4.25, 31.5));
    }

    #[test]
    fn ppm_round_trip_is_bit_exact() {
        let mut channels = [(); 3].map(|_| RasterGrid::zeros(5, 4, 1.0, Point::new(0.0, 4.0)));
        for (i, ch) in channels.iter_mut().enumerate() {
            ch.fill(|r, c| ((r + c * 3 + i) % 11) as f64 / 10.0);
        }
        let img = Imagery::new(channels);
        let mut bytes = Vec::new();
        img.write_ppm(&mut bytes).unwrap();
        let back = Imagery::read_ppm(&bytes[..]).unwrap();
        let mut bytes2 = Vec::new();
        back.write_ppm(&mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn aa_horizontal_line_profile() {
        // Horizontal segment through pixel-center height: center row gets
        // full coverage, adjacent rows nothing.
        let mut g = RasterGrid::zeros(21, 21, 1.0, Point::new(0.0, 21.0));
        let y = g.pixel_center(10, 0).y;
        g.draw_segment_aa(Point::new(2.0, y), Point::new(19.0, y));
        assert!(g.get(10, 10) >= 0.5);
        assert_eq!(g.get(8, 10), 0.0);
        assert_eq!(g.get(12, 10), 0.0);
    }

    #[test]
    fn aa_ink_tracks_length_at_any_angle() {
        for (dx, dy) in [(30.0, 0.0), (21.0, 21.0), (28.0, 9.0), (0.0, 30.0)] {
            let mut g = RasterGrid::zeros(64, 64, 1.0, Point::new(0.0, 64.0));
            let a = Point::new(15.0, 20.0);
            let b = Point::new(15.0 + dx, 20.0 + dy);
            g.draw_segment_aa(a, b);
            let length_px = a.distance(b);
            let ink: f64 = g.values().iter().sum();
            assert!(
                (ink - length_px).abs() <= 0.2 * length_px,
                "ink {ink} vs length {length_px} for delta ({dx}, {dy})"
            );
        }
    }

    #[test]
    fn bilinear_sample_interpolates() {
        let mut g = RasterGrid::zeros(2, 2, 1.0, Point::new(0.0, 2.0));
        g.set(0, 0, 1.0);
        // Mid-way between the four pixel centers.
        let mid = Point::new(1.0, 1.0);
        assert!((g.sample(mid) - 0.25).abs() < 1e-12);
        assert_eq!(g.sample(Point::new(50.0, 50.0)), 0.0);
    }
}
