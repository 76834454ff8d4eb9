#!/usr/bin/env python3
"""Writes the GeoTIFF fixtures under tests/data with tifffile.

The reader in src/geotiff.cpp is checked against these files; the values
written here are the expected values frozen in tests/test_geotiff.cpp.
Re-running the script must reproduce byte-identical files.
"""

import pathlib
import struct

import numpy as np
import tifffile

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"

SCALE = (0.00025, 0.00025, 0.0)
TIE = (0.0, 0.0, 0.0, -80.41, -1.19, 0.0)


def geokeys(raster_type=1):
    # version 1.1.0, 3 keys: GTModelType=geographic, GTRasterType, GeographicType=WGS84
    return (1, 1, 0, 3, 1024, 0, 1, 2, 1025, 0, 1, raster_type, 2048, 0, 1, 4326)


def geo_tags(nodata=None, raster_type=1, scale=SCALE, tie=TIE):
    tags = [
        (33550, "d", 3, scale, False),
        (33922, "d", 6, tie, False),
        (34735, "H", 16, geokeys(raster_type), False),
    ]
    if nodata is not None:
        tags.append((42113, "s", 0, nodata, False))
    return tags


F32 = np.array(
    [[1.5, 2.25, 3.0], [4.5, -9999.0, 6.75], [7.0, 8.125, 9.5]], dtype=np.float32
)
U16 = np.array([[0, 1, 2, 65535], [100, 200, 300, 400], [7, 8, 9, 10]], dtype=np.uint16)
U8 = np.array([[0, 128], [255, 42]], dtype=np.uint8)


def write(name, data, **kw):
    path = OUT / name
    extratags = kw.pop("extratags", geo_tags())
    tifffile.imwrite(path, data, extratags=extratags, metadata=None, software=False, **kw)
    return path


def patch_tag(path, tag, new_value):
    """Rewrites the inline SHORT value of one IFD entry (little-endian files)."""
    raw = bytearray(path.read_bytes())
    ifd = struct.unpack_from("<I", raw, 4)[0]
    (count,) = struct.unpack_from("<H", raw, ifd)
    for i in range(count):
        off = ifd + 2 + 12 * i
        t, typ, n = struct.unpack_from("<HHI", raw, off)
        if t == tag:
            assert typ == 3 and n == 1
            struct.pack_into("<H", raw, off + 8, new_value)
            path.write_bytes(bytes(raw))
            return
    raise KeyError(tag)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    nod = geo_tags(nodata="-9999")

    write("f32_3x3.tif", F32, extratags=nod, rowsperstrip=1)
    write("f32_3x3_deflate.tif", F32, extratags=nod, compression="zlib", rowsperstrip=2)
    write("u16_4x3.tif", U16)
    write("u16_4x3_deflate.tif", U16, compression="zlib")
    write("u8_2x2.tif", U8)
    write("f32_pixel_is_point.tif", F32, extratags=geo_tags(nodata="-9999", raster_type=2))

    write("tiled.tif", np.zeros((32, 32), np.float32), tile=(16, 16))
    write("bigendian.tif", F32, byteorder=">")
    write("int16.tif", np.zeros((2, 2), np.int16))
    write("rgb.tif", np.zeros((2, 2, 3), np.uint8), photometric="rgb")
    write("no_georef.tif", F32, extratags=[])
    lzw = write("lzw.tif", F32)
    patch_tag(lzw, 259, 5)

    # Independent read-back of the in-subset files.
    for name, expected in [
        ("f32_3x3.tif", F32),
        ("f32_3x3_deflate.tif", F32),
        ("u16_4x3.tif", U16),
        ("u16_4x3_deflate.tif", U16),
        ("u8_2x2.tif", U8),
    ]:
        got = tifffile.imread(OUT / name)
        assert np.array_equal(got, expected), name
    print("fixtures written to", OUT)


if __name__ == "__main__":
    main()
