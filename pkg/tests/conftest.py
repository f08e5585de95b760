import struct

import pytest

MAC_A = bytes.fromhex("020000000001")
MAC_B = bytes.fromhex("020000000002")


def eth(dst, src, ethertype):
    return dst + src + struct.pack("!H", ethertype)


def ipv4(src, dst, proto, payload, ihl=5):
    header = struct.pack("!BBHHHBBH", 0x40 | ihl, 0, 4 * ihl + len(payload), 1, 0, 64, proto, 0)
    header += bytes(int(p) for p in src.split(".")) + bytes(int(p) for p in dst.split("."))
    header += bytes(4 * ihl - 20)
    return header + payload


def tcp(sport, dport):
    return struct.pack("!HHIIBBHHH", sport, dport, 1, 0, 0x50, 0x02, 1024, 0, 0)


def pcap_bytes(records, magic=0xA1B2C3D4, endian="<", linktype=1):
    """Classic pcap built field by field: records are (ts_sec, ts_frac, frame[, orig_len])."""
    out = struct.pack(endian + "IHHiIII", magic, 2, 4, 0, 0, 65535, linktype)
    for rec in records:
        ts_sec, ts_frac, frame = rec[:3]
        orig = rec[3] if len(rec) > 3 else len(frame)
        out += struct.pack(endian + "IIII", ts_sec, ts_frac, len(frame), orig) + frame
    return out


@pytest.fixture
def tcp_frame():
    """A 60-octet Ethernet/IPv4/TCP frame 10.0.0.1:1234 -> 10.0.0.2:80."""
    frame = eth(MAC_B, MAC_A, 0x0800) + ipv4("10.0.0.1", "10.0.0.2", 6, tcp(1234, 80))
    return frame + bytes(60 - len(frame))


_results = []


@pytest.fixture
def criterion():
    """Record one acceptance-criterion verdict for the terminal summary."""

    def record(number, title, passed, detail=""):
        _results.append((number, title, passed, detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_results):
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] {number:>2}. {title}  {detail}")
