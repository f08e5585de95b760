"""Packet ingestion from classic pcap files and pre-extracted feature CSVs.

Only Ethernet (linktype 1) captures are accepted. Each record becomes a
:class:`PacketMeta` holding the fields the feature extractor needs; deeper
layers that cannot be parsed are simply left as ``None``.
"""

import csv
import ipaddress
import logging
import queue
import struct
import threading
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "FormatError",
    "PacketMeta",
    "PcapReader",
    "build_frame",
    "parse_frame",
    "prefetch",
    "read_feature_csv",
    "read_pcap",
    "write_feature_csv",
    "write_pcap",
]

ETH_HEADER_LEN = 14
ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_IPV6 = 0x86DD
ETHERTYPE_ARP = 0x0806
ETHERTYPE_VLAN = (0x8100, 0x88A8)
PROTO_TCP = 6
PROTO_UDP = 17
LINKTYPE_ETHERNET = 1

MAGIC_USEC = 0xA1B2C3D4
MAGIC_NSEC = 0xA1B23C4D


class FormatError(ValueError):
    """Input file or frame does not follow the expected format."""


@dataclass(frozen=True)
class PacketMeta:
    timestamp: float
    frame_len: int
    src_mac: Optional[str] = None
    dst_mac: Optional[str] = None
    src_ip: Optional[str] = None
    dst_ip: Optional[str] = None
    ip_proto: Optional[int] = None
    src_port: Optional[int] = None
    dst_port: Optional[int] = None

    @property
    def has_ip(self):
        return self.src_ip is not None and self.dst_ip is not None

    @property
    def has_ports(self):
        return self.src_port is not None and self.dst_port is not None


def _mac(b):
    return ":".join(f"{octet:02x}" for octet in b)


def parse_frame(data, timestamp=0.0, orig_len=None):
    """Decode an Ethernet frame into a :class:`PacketMeta`.

    Layers are decoded as deep as the captured bytes allow; a truncated IP or
    transport header leaves the corresponding fields unset rather than failing.
    """
    data = bytes(data)
    if len(data) < ETH_HEADER_LEN:
        raise FormatError(f"frame of {len(data)} octets is shorter than an Ethernet header")
    frame_len = len(data) if orig_len is None else int(orig_len)
    dst_mac = _mac(data[0:6])
    src_mac = _mac(data[6:12])
    (ethertype,) = struct.unpack_from("!H", data, 12)
    off = ETH_HEADER_LEN
    while ethertype in ETHERTYPE_VLAN:
        if len(data) < off + 4:
            return PacketMeta(timestamp, frame_len, src_mac, dst_mac)
        (ethertype,) = struct.unpack_from("!H", data, off + 2)
        off += 4

    fields = {}
    if ethertype == ETHERTYPE_IPV4:
        fields = _parse_ipv4(data, off)
    elif ethertype == ETHERTYPE_IPV6:
        fields = _parse_ipv6(data, off)
    return PacketMeta(timestamp, frame_len, src_mac, dst_mac, **fields)


def _parse_ipv4(data, off):
    if len(data) < off + 20:
        return {}
    ihl = (data[off] & 0x0F) * 4
    if ihl < 20 or len(data) < off + ihl:
        return {}
    proto = data[off + 9]
    fields = {
        "src_ip": str(ipaddress.IPv4Address(data[off + 12 : off + 16])),
        "dst_ip": str(ipaddress.IPv4Address(data[off + 16 : off + 20])),
        "ip_proto": proto,
    }
    fields.update(_parse_ports(data, off + ihl, proto))
    return fields


def _parse_ipv6(data, off):
    if len(data) < off + 40:
        return {}
    proto = data[off + 6]
    fields = {
        "src_ip": str(ipaddress.IPv6Address(data[off + 8 : off + 24])),
        "dst_ip": str(ipaddress.IPv6Address(data[off + 24 : off + 40])),
        "ip_proto": proto,
    }
    # extension headers are not walked; only a directly following TCP/UDP header is read
    fields.update(_parse_ports(data, off + 40, proto))
    return fields


def _parse_ports(data, off, proto):
    if proto not in (PROTO_TCP, PROTO_UDP) or len(data) < off + 4:
        return {}
    sport, dport = struct.unpack_from("!HH", data, off)
    return {"src_port": sport, "dst_port": dport}


class PcapReader:
    """Sequential iterator over the records of a classic pcap file.

    ``truncated`` counts records cut short by the end of the file (iteration
    stops at the first one); ``runts`` counts records shorter than an Ethernet
    header, which are yielded with only time and length set.
    """

    def __init__(self, path):
        self.path = path
        self.truncated = 0
        self.runts = 0
        self.count = 0

    def __iter__(self) -> Iterator[PacketMeta]:
        with open(self.path, "rb") as fh:
            header = fh.read(24)
            if len(header) < 24:
                raise FormatError(f"{self.path}: missing pcap global header")
            endian, ticks = _pcap_endianness(header)
            _, _, _, _, _, snaplen, linktype = struct.unpack(endian + "IHHiIII", header)
            if linktype != LINKTYPE_ETHERNET:
                raise FormatError(f"{self.path}: unsupported linktype {linktype} (need Ethernet)")
            rec = struct.Struct(endian + "IIII")
            while True:
                head = fh.read(16)
                if not head:
                    break
                if len(head) < 16:
                    self.truncated += 1
                    break
                ts_sec, ts_frac, incl_len, orig_len = rec.unpack(head)
                data = fh.read(incl_len)
                if len(data) < incl_len:
                    self.truncated += 1
                    break
                # integer ticks divided once so timestamps round-trip exactly
                ts = (ts_sec * ticks + ts_frac) / ticks
                self.count += 1
                if incl_len < ETH_HEADER_LEN:
                    self.runts += 1
                    yield PacketMeta(ts, orig_len)
                    continue
                yield parse_frame(data, ts, orig_len)
        if self.truncated:
            logger.warning("%s: stopped at a truncated record after %d packets", self.path, self.count)


def _pcap_endianness(header):
    for endian in ("<", ">"):
        (magic,) = struct.unpack(endian + "I", header[:4])
        if magic == MAGIC_USEC:
            return endian, 10**6
        if magic == MAGIC_NSEC:
            return endian, 10**9
    raise FormatError(f"bad pcap magic {header[:4].hex()}")


def read_pcap(path):
    """Yield one :class:`PacketMeta` per record of the pcap file at ``path``."""
    yield from PcapReader(path)


def _mac_bytes(mac):
    if mac is None:
        return bytes(6)
    return bytes(int(part, 16) for part in mac.split(":"))


def build_frame(meta, payload_len=None):
    """Serialize ``meta`` into an Ethernet frame that parses back to the same fields.

    The frame is zero-padded to ``meta.frame_len`` when that is larger than the
    headers. Used to write synthetic captures.
    """
    eth = _mac_bytes(meta.dst_mac) + _mac_bytes(meta.src_mac)
    if not meta.has_ip:
        body = eth + struct.pack("!H", ETHERTYPE_ARP) + bytes(28)
    else:
        src = ipaddress.ip_address(meta.src_ip)
        dst = ipaddress.ip_address(meta.dst_ip)
        proto = meta.ip_proto if meta.ip_proto is not None else 0
        transport = b""
        if meta.has_ports:
            transport = struct.pack("!HH", meta.src_port, meta.dst_port)
            transport += bytes(16 if proto == PROTO_TCP else 4)
        if src.version == 4:
            total = 20 + len(transport)
            ip = struct.pack("!BBHHHBBH", 0x45, 0, total, 0, 0, 64, proto, 0)
            ip += src.packed + dst.packed
            body = eth + struct.pack("!H", ETHERTYPE_IPV4) + ip + transport
        else:
            ip = struct.pack("!IHBB", 6 << 28, len(transport), proto, 64)
            ip += src.packed + dst.packed
            body = eth + struct.pack("!H", ETHERTYPE_IPV6) + ip + transport
    if len(body) < meta.frame_len:
        body += bytes(meta.frame_len - len(body))
    return body


def write_pcap(path, packets, nanosecond=False):
    """Write an iterable of :class:`PacketMeta` as a little-endian classic pcap."""
    magic = MAGIC_NSEC if nanosecond else MAGIC_USEC
    scale = 10**9 if nanosecond else 10**6
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IHHiIII", magic, 2, 4, 0, 0, 65535, LINKTYPE_ETHERNET))
        for meta in packets:
            frame = build_frame(meta)
            ts_sec = int(meta.timestamp)
            ts_frac = round((meta.timestamp - ts_sec) * scale)
            if ts_frac >= scale:
                ts_sec, ts_frac = ts_sec + 1, ts_frac - scale
            fh.write(struct.pack("<IIII", ts_sec, ts_frac, len(frame), max(meta.frame_len, len(frame))))
            fh.write(frame)


_DONE = object()


def prefetch(iterable, maxsize=4096):
    """Run ``iterable`` on a background thread, yielding items in order.

    The bounded queue lets parsing run ahead of a slower consumer.
    """
    q = queue.Queue(maxsize=maxsize)
    error = []

    def producer():
        try:
            for item in iterable:
                q.put(item)
        except BaseException as exc:  # re-raised on the consumer side
            error.append(exc)
        finally:
            q.put(_DONE)

    thread = threading.Thread(target=producer, daemon=True)
    thread.start()
    while True:
        item = q.get()
        if item is _DONE:
            break
        yield item
    thread.join()
    if error:
        raise error[0]


def read_feature_csv(path):
    """Read a feature-vector CSV.

    The header row names the columns; a leading ``timestamp`` column is split
    off. Returns ``(timestamps or None, X)`` with ``X`` of shape (rows, n).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise FormatError(f"{path}: empty feature file")
        has_ts = header[0].strip().lower() == "timestamp"
        width = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise FormatError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: no feature rows")
    data = np.array(rows, dtype=np.float64)
    if has_ts:
        return data[:, 0], data[:, 1:]
    return None, data


def write_feature_csv(path, X, timestamps=None, names=None):
    X = np.asarray(X, dtype=np.float64)
    if names is None:
        names = [f"f{i}" for i in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if timestamps is None:
            writer.writerow(names)
            writer.writerows(X.tolist())
        else:
            writer.writerow(["timestamp", *names])
            for t, row in zip(timestamps, X.tolist()):
                writer.writerow([float(t), *row])
