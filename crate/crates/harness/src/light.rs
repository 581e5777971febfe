//! Simulated light state driven by executed commands.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LightState {
    pub on: bool,
    pub intensity: u8,
    pub rgb: [u8; 3],
}

impl Default for LightState {
    fn default() -> Self {
        Self {
            on: false,
            intensity: 0,
            rgb: [255, 255, 255],
        }
    }
}

fn parse_rgb(s: &str) -> Option<[u8; 3]> {
    if s.len() != 6 {
        return None;
    }
    let v = u32::from_str_radix(s, 16).ok()?;
    Some([(v >> 16) as u8, (v >> 8) as u8, v as u8])
}

fn parse_delta(s: &str) -> Option<i32> {
    let v: i32 = s.strip_prefix('+').unwrap_or(s).parse().ok()?;
    (-255..=255).contains(&v).then_some(v)
}

impl LightState {
    /// Applies a lighting command. Returns false for commands that do not
    /// change light state (status, config, unparseable arguments).
    pub fn apply(&mut self, cmd: &[u8]) -> bool {
        let Ok(cmd) = std::str::from_utf8(cmd) else {
            return false;
        };
        let before = *self;
        let parts: Vec<&str> = cmd.split('/').collect();
        match parts.as_slice() {
            ["on"] => {
                self.on = true;
                if self.intensity == 0 {
                    self.intensity = 255;
                }
            }
            ["off"] => self.on = false,
            ["level", v] => match v.parse::<u8>() {
                Ok(v) => {
                    self.intensity = v;
                    self.on = v > 0;
                }
                Err(_) => return false,
            },
            ["rgb", c] => match parse_rgb(c) {
                Some(c) => self.rgb = c,
                None => return false,
            },
            ["intensity", rest @ ..] => {
                let mut it = rest.iter();
                let Some(d) = it.next().and_then(|d| parse_delta(d)) else {
                    return false;
                };
                let mut rgb = None;
                while let Some(k) = it.next() {
                    match (*k, it.next()) {
                        ("rgb-8bit-color", Some(c)) => rgb = Some(parse_rgb(c)),
                        _ => return false,
                    }
                }
                if let Some(c) = rgb {
                    match c {
                        Some(c) => self.rgb = c,
                        None => return false,
                    }
                }
                self.intensity = (i32::from(self.intensity) + d).clamp(0, 255) as u8;
                self.on = self.intensity > 0;
            }
            _ => return false,
        }
        *self != before
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commands() {
        let mut l = LightState::default();
        assert!(l.apply(b"on"));
        assert_eq!((l.on, l.intensity), (true, 255));
        assert!(l.apply(b"level/40"));
        assert_eq!(l.intensity, 40);
        assert!(l.apply(b"intensity/+10/rgb-8bit-color/F0FF39"));
        assert_eq!((l.intensity, l.rgb), (50, [0xF0, 0xFF, 0x39]));
        assert!(l.apply(b"intensity/-100"));
        assert_eq!((l.on, l.intensity), (false, 0));
        assert!(l.apply(b"rgb/000102"));
        assert_eq!(l.rgb, [0, 1, 2]);
        assert!(!l.apply(b"status"));
        assert!(!l.apply(b"config/dmx/12"));
        assert!(!l.apply(b"level/300"));
        assert!(!l.apply(b"rgb/zz0000"));
        assert!(!l.apply(&[0xff, 0xfe]));
    }
}
