/**
 * The closed-form overlays: decay-rate prediction for the mass of BBM
 * in an expanding ball (exact line and unresolved band), the quenched
 * growth curve among mild obstacles, and the clearing radius scale.
 */

// first positive zeros of J_{d/2-1}, d = 1..10 (d=1 is pi/2, d=3 is pi)
const BESSEL_FIRST_ZERO = [
  1.5707963267948966, 2.4048255576957707, 3.141592653589793,
  3.831705970207512, 4.4934094579090615, 5.135622301840683,
  5.763459196894546, 6.380161895923984, 6.987932000500524,
  7.588342434503807,
];

export function lambdaD(dim: number): number {
  if (!Number.isInteger(dim) || dim < 1 || dim > 10) {
    throw new Error(`dim must be in 1..10, got ${dim}`);
  }
  const z = BESSEL_FIRST_ZERO[dim - 1];
  return (z * z) / 2;
}

function factorial(n: number): number {
  let out = 1;
  for (let k = 2; k <= n; k++) out *= k;
  return out;
}

/** Gamma(m/2 + 1) for integer m >= 0 (exact half-integer formula). */
function gammaHalfPlusOne(m: number): number {
  if (m % 2 === 0) return factorial(m / 2);
  const n = (m + 1) / 2; // Gamma(n + 1/2) with n = (m+1)/2
  return (factorial(2 * n) / (4 ** n * factorial(n))) * Math.sqrt(Math.PI);
}

export function unitBallVolume(dim: number): number {
  return Math.PI ** (dim / 2) / gammaHalfPlusOne(dim);
}

export function cDNu(dim: number, nu: number): number {
  return lambdaD(dim) * (dim / (nu * unitBallVolume(dim))) ** (-2 / dim);
}

export interface LdOverlay {
  beta: number;
  exactEnd: number;   // sqrt(beta/2): the exact regime boundary
  bandLow: number;    // -sqrt(2 beta)
  bandHigh: number;   // -sqrt(beta/2)
}

export function ldOverlay(beta: number): LdOverlay {
  return {
    beta,
    exactEnd: Math.sqrt(beta / 2),
    bandLow: -Math.sqrt(2 * beta),
    bandHigh: -Math.sqrt(beta / 2),
  };
}

/** Band lower edge as a function of kappa: -min(kappa, sqrt(2 beta)). */
export function ldBandLowerAt(beta: number, kappa: number): number {
  return -Math.min(kappa, Math.sqrt(2 * beta));
}

/** Predicted (log N_t)/t among mild obstacles; valid for t > e. */
export function growthCurve(dim: number, nu: number, beta: number): (t: number) => number {
  const c = cDNu(dim, nu);
  return (t) => beta - c / Math.log(t) ** (2 / dim);
}

export interface ClearingScale {
  r0: number;
  rEll: number;
  clamped: boolean;
}

export function clearingScale(dim: number, nu: number, ell: number): ClearingScale {
  if (nu <= 0 || ell <= Math.E) throw new Error("need nu > 0 and ell > e");
  const r0 = (dim / (nu * unitBallVolume(dim))) ** (1 / dim);
  const raw = r0 * Math.log(ell) ** (1 / dim) - Math.log(Math.log(ell)) ** 2;
  return { r0, rEll: Math.max(0, raw), clamped: raw < 0 };
}
