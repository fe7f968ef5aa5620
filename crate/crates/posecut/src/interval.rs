//! Closed-interval arithmetic over `f64`.
//!
//! Used by the pose-cell bounds to enclose every value a quantity can take
//! while the pose ranges over an axis-aligned cell. Operations are inclusion
//! isotone: if the inputs shrink, the output shrinks, which is what makes the
//! branch-and-bound bounds monotone under cell splitting.

/// A closed interval `[lo, hi]`. Degenerate intervals (`lo == hi`) represent
/// exact values, so a zero-width pose cell evaluates to exact arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(self, other: Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn neg(self) -> Self {
        Self::new(-self.hi, -self.lo)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn mul(self, o: Self) -> Self {
        let c = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        Self::new(min4(c), max4(c))
    }

    pub fn scale(self, k: f64) -> Self {
        if k >= 0.0 {
            Self::new(self.lo * k, self.hi * k)
        } else {
            Self::new(self.hi * k, self.lo * k)
        }
    }

    pub fn add_scalar(self, k: f64) -> Self {
        Self::new(self.lo + k, self.hi + k)
    }

    /// Division. When the divisor straddles zero the quotient is unbounded;
    /// we return a huge finite interval so downstream clamping still works.
    pub fn div(self, o: Self) -> Self {
        if o.lo > 0.0 || o.hi < 0.0 {
            let c = [
                self.lo / o.lo,
                self.lo / o.hi,
                self.hi / o.lo,
                self.hi / o.hi,
            ];
            Self::new(min4(c), max4(c))
        } else {
            Self::new(-HUGE, HUGE)
        }
    }

    pub fn square(self) -> Self {
        if self.lo >= 0.0 {
            Self::new(self.lo * self.lo, self.hi * self.hi)
        } else if self.hi <= 0.0 {
            Self::new(self.hi * self.hi, self.lo * self.lo)
        } else {
            Self::new(0.0, (self.lo * self.lo).max(self.hi * self.hi))
        }
    }

    /// Square root of the non-negative part. Intervals entirely below zero
    /// collapse to `[0, 0]`.
    pub fn sqrt_nonneg(self) -> Self {
        let lo = self.lo.max(0.0);
        let hi = self.hi.max(0.0);
        Self::new(lo.sqrt(), hi.sqrt())
    }

    /// Sine over the interval (radians), accounting for interior extrema.
    pub fn sin(self) -> Self {
        if self.width() >= 2.0 * std::f64::consts::PI {
            return Self::new(-1.0, 1.0);
        }
        let mut lo = self.lo.sin().min(self.hi.sin());
        let mut hi = self.lo.sin().max(self.hi.sin());
        // sin has a max at pi/2 + 2k*pi and a min at -pi/2 + 2k*pi
        if contains_angle(self, std::f64::consts::FRAC_PI_2) {
            hi = 1.0;
        }
        if contains_angle(self, -std::f64::consts::FRAC_PI_2) {
            lo = -1.0;
        }
        Self::new(lo, hi)
    }

    pub fn cos(self) -> Self {
        self.add_scalar(std::f64::consts::FRAC_PI_2).sin()
    }

    pub fn union(self, o: Self) -> Self {
        Self::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }

    /// Symmetric outward padding, relative to magnitude. Compensates for
    /// rounding in chained float operations before quantizing to bins.
    pub fn pad(self, rel: f64) -> Self {
        let m = rel * (1.0 + self.lo.abs().max(self.hi.abs()));
        Self::new(self.lo - m, self.hi + m)
    }
}

const HUGE: f64 = 1e18;

fn min4(c: [f64; 4]) -> f64 {
    c[0].min(c[1]).min(c[2]).min(c[3])
}

fn max4(c: [f64; 4]) -> f64 {
    c[0].max(c[1]).max(c[2]).max(c[3])
}

/// Does `[iv.lo, iv.hi]` contain an angle congruent to `target` mod 2*pi?
fn contains_angle(iv: Interval, target: f64) -> bool {
    let tau = 2.0 * std::f64::consts::PI;
    let k = ((iv.lo - target) / tau).ceil();
    target + k * tau <= iv.hi
}

/// An interval-valued 3-vector.
#[derive(Debug, Clone, Copy)]
pub struct IVec3 {
    pub x: Interval,
    pub y: Interval,
    pub z: Interval,
}

impl IVec3 {
    pub fn point(v: [f64; 3]) -> Self {
        Self {
            x: Interval::point(v[0]),
            y: Interval::point(v[1]),
            z: Interval::point(v[2]),
        }
    }

    pub fn add(self, o: Self) -> Self {
        Self {
            x: self.x.add(o.x),
            y: self.y.add(o.y),
            z: self.z.add(o.z),
        }
    }

    pub fn sub(self, o: Self) -> Self {
        Self {
            x: self.x.sub(o.x),
            y: self.y.sub(o.y),
            z: self.z.sub(o.z),
        }
    }

    pub fn dot(self, o: Self) -> Interval {
        self.x.mul(o.x).add(self.y.mul(o.y)).add(self.z.mul(o.z))
    }

    pub fn scale_iv(self, k: Interval) -> Self {
        Self {
            x: self.x.mul(k),
            y: self.y.mul(k),
            z: self.z.mul(k),
        }
    }

    pub fn norm(self) -> Interval {
        self.x
            .square()
            .add(self.y.square())
            .add(self.z.square())
            .sqrt_nonneg()
    }
}
