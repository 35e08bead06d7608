//! Grayscale images, binary PGM/PPM io, gradients, and segment
//! rasterization.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Image {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn get(&self, x: i32, y: i32) -> u8 {
        // clamped access, replicating the border
        let x = x.clamp(0, self.width as i32 - 1) as usize;
        let y = y.clamp(0, self.height as i32 - 1) as usize;
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn contains(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Central differences without the 1/2 factor, so a full-contrast step
    /// edge saturates the gradient magnitude at 255 exactly.
    pub fn gradient(&self, x: i32, y: i32) -> (f64, f64) {
        let gx = self.get(x + 1, y) as f64 - self.get(x - 1, y) as f64;
        let gy = self.get(x, y + 1) as f64 - self.get(x, y - 1) as f64;
        (gx, gy)
    }

    pub fn gradient_magnitude(&self, x: i32, y: i32) -> f64 {
        let (gx, gy) = self.gradient(x, y);
        (gx * gx + gy * gy).sqrt()
    }

    /// Binary PGM (P5, maxval <= 255).
    pub fn read_pgm(mut r: impl BufRead) -> Result<Image> {
        let mut header = Vec::new();
        // magic, width, height, maxval; comments allowed between tokens
        let mut token = String::new();
        while header.len() < 4 {
            let mut byte = [0u8; 1];
            let n = r.read(&mut byte)?;
            if n == 0 {
                return Err(Error::Input("truncated PGM header".into()));
            }
            let c = byte[0] as char;
            if c == '#' {
                let mut comment = String::new();
                r.read_line(&mut comment)?;
                continue;
            }
            if c.is_whitespace() {
                if !token.is_empty() {
                    header.push(std::mem::take(&mut token));
                }
            } else {
                token.push(c);
            }
        }
        if header[0] != "P5" {
            return Err(Error::Input(format!("expected P5, got {}", header[0])));
        }
        let width: usize = header[1]
            .parse()
            .map_err(|_| Error::Input("bad PGM width".into()))?;
        let height: usize = header[2]
            .parse()
            .map_err(|_| Error::Input("bad PGM height".into()))?;
        let maxval: usize = header[3]
            .parse()
            .map_err(|_| Error::Input("bad PGM maxval".into()))?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::Input(format!("unsupported PGM maxval {maxval}")));
        }
        let mut pixels = vec![0u8; width * height];
        r.read_exact(&mut pixels)
            .map_err(|_| Error::Input("PGM pixel data shorter than header promises".into()))?;
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn write_pgm(&self, w: &mut dyn Write) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)?;
        Ok(())
    }

    /// Binary PPM (P6) of this image with the given pixels drawn in red.
    pub fn write_ppm_overlay(&self, marked: &[(i32, i32)], w: &mut dyn Write) -> Result<()> {
        let mut rgb = Vec::with_capacity(self.width * self.height * 3);
        for &v in &self.pixels {
            rgb.extend_from_slice(&[v, v, v]);
        }
        for &(x, y) in marked {
            if self.contains(x, y) {
                let at = (y as usize * self.width + x as usize) * 3;
                rgb[at] = 255;
                rgb[at + 1] = 0;
                rgb[at + 2] = 0;
            }
        }
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&rgb)?;
        Ok(())
    }
}

/// Integer segment rasterization (Bresenham), endpoints included. Endpoints
/// are ordered canonically first so `raster_segment(a, b)` and
/// `raster_segment(b, a)` return the same pixel set bit-exactly.
pub fn raster_segment(a: (i32, i32), b: (i32, i32)) -> Vec<(i32, i32)> {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let (mut x, mut y) = a;
    let (x1, y1) = b;
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}
