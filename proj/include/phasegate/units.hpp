// Unit conversions. All internal computation is done in Hartree atomic units
// (hbar = m_e = e = a0 = 1); config files and CSV output speak lab units
// (cm^-1, nm, MHz, fs, amu) and the factors below do the translation.
#pragma once

#include <cmath>

namespace phasegate::units {

// CODATA 2018.
inline constexpr double cm1_per_hartree = 219474.6313632;     // hc * 1 cm^-1 -> Eh
inline constexpr double nm_per_bohr     = 0.0529177210903;    // a0 -> nm
inline constexpr double fs_per_atu      = 0.02418884326586;   // hbar/Eh -> fs
inline constexpr double me_per_amu      = 1822.888486209;     // u -> m_e

inline constexpr double bohr_per_nm = 1.0 / nm_per_bohr;
inline constexpr double atu_per_fs  = 1.0 / fs_per_atu;
inline constexpr double atu_per_ps  = 1000.0 * atu_per_fs;

inline double cm1_to_hartree(double e) { return e / cm1_per_hartree; }
inline double hartree_to_cm1(double e) { return e * cm1_per_hartree; }
inline double nm_to_bohr(double r) { return r * bohr_per_nm; }
inline double bohr_to_nm(double r) { return r * nm_per_bohr; }
inline double fs_to_atu(double t) { return t * atu_per_fs; }
inline double atu_to_fs(double t) { return t * fs_per_atu; }
inline double amu_to_me(double m) { return m * me_per_amu; }

// Trap frequencies are quoted as ordinary frequencies nu (MHz); the angular
// frequency omega = 2 pi nu is what enters the Hamiltonian.
inline double mhz_to_angular_au(double nu_mhz) {
    return 2.0 * M_PI * nu_mhz * 1.0e6 * 2.4188843265857e-17;
}
inline double angular_au_to_mhz(double w) {
    return w / (2.0 * M_PI * 1.0e6 * 2.4188843265857e-17);
}

}  // namespace phasegate::units
