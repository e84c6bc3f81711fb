#ifndef CQED_SCAN_HPP
#define CQED_SCAN_HPP

#include <map>
#include <string>
#include <vector>

#include "cqed/model.hpp"
#include "cqed/oracle.hpp"
#include "cqed/scattering.hpp"

namespace cqed {

// Plain "key = value" configuration, one entry per line, '#' comments.
class Config {
  public:
    static Config parse(const std::string& text);
    static Config parse_file(const std::string& path);

    bool has(const std::string& key) const;
    std::string str(const std::string& key) const;
    std::string str(const std::string& key, const std::string& def) const;
    double num(const std::string& key) const;
    double num(const std::string& key, double def) const;
    int integer(const std::string& key, int def) const;
    // comma-separated list of numbers
    std::vector<double> list(const std::string& key) const;
    std::vector<double> list(const std::string& key,
                             const std::vector<double>& def) const;

  private:
    std::map<std::string, std::string> kv_;
};

// A sweep over one dimensionless pulse-length variable at fixed
// (kappa/g, q/g, gamma/g) combinations; g = 1 fixes the unit.
struct ScanConfig {
    std::vector<double> kappa_over_g{5.0};
    std::vector<double> q_over_g{0.0};
    std::vector<double> gamma_over_g{0.0};
    std::string sweep = "g2d_over_kappa"; // or "kappa_d"
    double sweep_min = 0.05;
    double sweep_max = 5.0;
    int sweep_points = 25;
    bool sweep_log = true;
    double a_over_d = -8.0; // pulse center in units of its width
    double beta_tol = 1e-4;
    int beta_levels = 2;
    double flag_tol = 0.02; // beta error estimate above this flags the row
    int workers = 1;
};

ScanConfig scan_config(const Config& c);

// system and pulse for one sweep point (g = 1)
std::pair<SystemParams, PulseParams>
scan_point(const ScanConfig& c, double kog, double qog, double gog, double x);

struct ScanRow {
    double kappa_over_g = 0.0, q_over_g = 0.0, gamma_over_g = 0.0;
    double sweep_value = 0.0;
    BetaResult res;
    bool flagged = false;
    std::string note; // failure reason, empty when clean
};

// rows ordered by (kappa/g, q/g, gamma/g) list position, then sweep value
std::vector<ScanRow> run_scan(const ScanConfig& c);

void write_scan_csv(std::ostream& os, const ScanConfig& c,
                    const std::vector<ScanRow>& rows);

// Overlap of the Gaussian input with the ideal absorption waveform
// emitted over (-t, 0); the Gaussian is centered on the waveform
// centroid so only the shape is compared.
struct PulseConfig {
    SystemParams p{1.0, 0.0, 0.0, 0.0, 5.0};
    double t = 60.0;
    std::vector<double> q_list, d_list;
};

PulseConfig pulse_config(const Config& c);

struct PulseRow {
    double q = 0.0, d = 0.0;
    double a_best = 0.0;
    double overlap = 0.0; // |<phi|psi_in>|^2 / (|phi|^2 |psi_in|^2)
};

struct PulseOutcome {
    std::vector<PulseRow> rows; // d fastest, q slowest
    PulseRow best;
    double phi_norm2 = 0.0;
};

PulseOutcome run_pulse(const PulseConfig& c);

void write_pulse_csv(std::ostream& os, const PulseOutcome& out);

// Both pipelines at one parameter point, with the discrepancies the
// comparison cares about.
struct OracleCompareReport {
    double diff_one = 0.0;  // relative L2, one-photon output
    double diff_two = 0.0;  // relative L2, two-photon output
    cplx beta_oracle = 0.0;
    cplx beta_analytic = 0.0;
    double dbeta = 0.0; // | |beta_or - 1| - |beta_an - 1| |
    double drift = 0.0, residual = 0.0;
    double seconds = 0.0;
};

OracleCompareReport oracle_compare(const SystemParams& p,
                                   const PulseParams& pulse,
                                   const OracleSettings& s = {});

// single-point system and pulse from a config (same keys as a scan, one
// value each)
std::pair<SystemParams, PulseParams> single_point(const Config& c);

// optical pulse length c*d in meters for lab rates quoted in MHz
double pulse_length_meters(double g_mhz, double kappa_mhz,
                           double g2d_over_kappa);

} // namespace cqed

#endif
