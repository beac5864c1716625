#pragma once
// Channel occupancy times for 802.11 DCF (DSSS PHY, long preamble).
//
// Every frame on the air costs a fixed PHY overhead (preamble + PLCP header,
// clocked at one symbol duration per symbol) plus its body octets at the
// channel bit rate.  Control frames (ACK/RTS/CTS) ride at the same rate as
// data; the PHY overhead is what dominates their airtime.

#include <string_view>

namespace dcf {

enum class AccessMode { Basic, RtsCts };

std::string_view to_string(AccessMode mode);
AccessMode access_mode_from_string(std::string_view name); // throws std::invalid_argument

struct MacTimingParams {
    double channel_rate_mbps = 11.0; // body octets ride at this, bits per microsecond
    int phy_preamble_symbols = 144;
    int phy_header_symbols = 48;
    double symbol_duration_us = 1.0;
    int mac_header_octets = 34; // MAC header + FCS
    int ack_octets = 14;
    int rts_octets = 20;
    int cts_octets = 14;
    double sifs_us = 10.0;
    double difs_us = 50.0;
    double slot_sigma_us = 20.0;
    int payload_octets = 2312;

    // Rates/durations/frame sizes strictly positive; payload_octets may be 0.
    void validate() const; // throws std::invalid_argument

    bool operator==(const MacTimingParams&) const = default;
};

struct ChannelTimes {
    AccessMode mode = AccessMode::Basic;
    double t_s = 0.0;             // channel time of a successful exchange, us
    double t_c = 0.0;             // channel time wasted by a collision, us
    double t_e = 0.0;             // channel time of an errored exchange; equals t_s
    double payload_airtime = 0.0; // time the payload bits alone occupy, us
};

// PHY preamble + PLCP header duration in us:
// (phy_preamble_symbols + phy_header_symbols) * symbol_duration_us.
double phy_overhead(const MacTimingParams& p);

// Airtime of `octets` body octets at the channel rate: 8*octets / rate.
// Body only -- PHY overhead is added per frame by channel_times.  octets >= 0.
double frame_airtime(int octets, const MacTimingParams& p);

// Assemble t_s / t_c / t_e for the given access mode.  Writing DUR(x) for
// phy_overhead + frame_airtime(x octets):
//
// Basic:   t_c = DUR(mac_header + payload) + DIFS
//          t_s = t_c + SIFS + DUR(ack)                  (exact, by construction)
// RTS/CTS: t_c = DUR(rts) + DIFS
//          t_s = t_c + SIFS + DUR(cts) + SIFS + DUR(mac_header + payload)
//                    + SIFS + DUR(ack)
//
// An errored data frame occupies the channel as long as a success (the sender
// still sits out the ACK timeout), so t_e = t_s in both modes.
ChannelTimes channel_times(AccessMode mode, const MacTimingParams& p);

} // namespace dcf
