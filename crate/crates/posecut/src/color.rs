//! sRGB to CIE LUV conversion (D65 white).

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

const UN_PRIME: f64 = 0.197839825;
const VN_PRIME: f64 = 0.468336303;

pub fn rgb_to_luv(rgb: [u8; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

    let l = if y > 216.0 / 24389.0 {
        116.0 * y.cbrt() - 16.0
    } else {
        24389.0 / 27.0 * y
    };
    let denom = x + 15.0 * y + 3.0 * z;
    let (up, vp) = if denom > 1e-12 {
        (4.0 * x / denom, 9.0 * y / denom)
    } else {
        (UN_PRIME, VN_PRIME)
    };
    [l, 13.0 * l * (up - UN_PRIME), 13.0 * l * (vp - VN_PRIME)]
}

pub fn luv_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_and_white_anchors() {
        let black = rgb_to_luv([0, 0, 0]);
        assert!(black[0].abs() < 1e-9 && black[1].abs() < 1e-9 && black[2].abs() < 1e-9);
        let white = rgb_to_luv([255, 255, 255]);
        assert!((white[0] - 100.0).abs() < 0.01, "L = {}", white[0]);
        assert!(white[1].abs() < 0.05 && white[2].abs() < 0.05);
    }

    #[test]
    fn hues_are_far_apart() {
        let red = rgb_to_luv([255, 0, 0]);
        let green = rgb_to_luv([0, 255, 0]);
        assert!(luv_distance(red, green) > 100.0);
        assert!(luv_distance(red, red) == 0.0);
    }
}
