#include "dcf/mac_timing.hpp"

#include <stdexcept>
#include <string>

namespace dcf {

std::string_view to_string(AccessMode mode) {
    return mode == AccessMode::Basic ? "basic" : "rtscts";
}

AccessMode access_mode_from_string(std::string_view name) {
    if (name == "basic") return AccessMode::Basic;
    if (name == "rtscts") return AccessMode::RtsCts;
    throw std::invalid_argument("unknown access mode '" + std::string(name) +
                                "' (expected 'basic' or 'rtscts')");
}

void MacTimingParams::validate() const {
    auto need_pos = [](double v, const char* what) {
        if (!(v > 0.0))
            throw std::invalid_argument(std::string(what) + " must be > 0");
    };
    need_pos(channel_rate_mbps, "channel_rate_mbps");
    need_pos(phy_preamble_symbols, "phy_preamble_symbols");
    need_pos(phy_header_symbols, "phy_header_symbols");
    need_pos(symbol_duration_us, "symbol_duration_us");
    need_pos(mac_header_octets, "mac_header_octets");
    need_pos(ack_octets, "ack_octets");
    need_pos(rts_octets, "rts_octets");
    need_pos(cts_octets, "cts_octets");
    need_pos(sifs_us, "sifs_us");
    need_pos(difs_us, "difs_us");
    need_pos(slot_sigma_us, "slot_sigma_us");
    if (payload_octets < 0)
        throw std::invalid_argument("payload_octets must be >= 0");
}

double phy_overhead(const MacTimingParams& p) {
    return (p.phy_preamble_symbols + p.phy_header_symbols) * p.symbol_duration_us;
}

double frame_airtime(int octets, const MacTimingParams& p) {
    if (octets < 0) throw std::invalid_argument("frame_airtime: octets must be >= 0");
    return 8.0 * octets / p.channel_rate_mbps;
}

ChannelTimes channel_times(AccessMode mode, const MacTimingParams& p) {
    p.validate();
    const double phy = phy_overhead(p);
    const double data_dur = phy + frame_airtime(p.mac_header_octets + p.payload_octets, p);
    const double ack_dur = phy + frame_airtime(p.ack_octets, p);

    ChannelTimes ct;
    ct.mode = mode;
    ct.payload_airtime = frame_airtime(p.payload_octets, p);
    if (mode == AccessMode::Basic) {
        // t_s built from t_c so t_s - t_c == sifs + ack_dur holds bit-exactly.
        ct.t_c = data_dur + p.difs_us;
        ct.t_s = ct.t_c + p.sifs_us + ack_dur;
    } else {
        const double cts_dur = phy + frame_airtime(p.cts_octets, p);
        ct.t_c = phy + frame_airtime(p.rts_octets, p) + p.difs_us;
        ct.t_s = ct.t_c + p.sifs_us + cts_dur + p.sifs_us + data_dur + p.sifs_us + ack_dur;
    }
    ct.t_e = ct.t_s;
    return ct;
}

} // namespace dcf
