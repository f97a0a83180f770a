"""Unit tests for the classfile decoder."""

import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.classmodel.classfile import decode_modified_utf8, parse_classfile
from src.classmodel.model import ClassSource, InvokeKind
from src.common.errors import MalformedClassfile, UnsupportedVersion
from tests.helpers.classfile_builder import build_classfile
from tests.helpers.fixtures import CLASSES_DIR, load_ir
from tests.helpers.models import dispatch_ladder

XSTRING_BYTES = (CLASSES_DIR / "XString.class").read_bytes()
# Access flags follow the 17-entry constant pool at offset 272
THIS_CLASS_AT = 274


class TestFrozenClassfile:
    def test_matches_ir_twin(self):
        parsed = parse_classfile(XSTRING_BYTES)
        expected = load_ir("xstring")[0].with_source(ClassSource.CLASSFILE)
        assert parsed == expected

    def test_invoke_offset_inside_body(self):
        method = parse_classfile(XSTRING_BYTES).methods[0]
        assert method.id.name == "equals"
        assert [s.bytecode_offset for s in method.invoke_sites] == [1]
        assert method.invoke_sites[0].kind is InvokeKind.VIRTUAL
        assert str(method.invoke_sites[0].target) == "java/lang/Object.toString()Ljava/lang/String;"

    def test_version_above_maximum(self):
        data = bytearray(XSTRING_BYTES)
        data[7] = 53
        with pytest.raises(UnsupportedVersion) as ctx:
            parse_classfile(bytes(data))
        assert ctx.value.major == 53
        assert parse_classfile(bytes(data), max_version=53).name.endswith("XString")

    def test_bad_magic(self):
        with pytest.raises(MalformedClassfile) as ctx:
            parse_classfile(b"\xca\xfe\xba\xbf" + XSTRING_BYTES[4:])
        assert ctx.value.offset == 0

    def test_trailing_bytes(self):
        with pytest.raises(MalformedClassfile, match="trailing"):
            parse_classfile(XSTRING_BYTES + b"\x00")

    def test_every_truncation_is_malformed(self):
        for size in range(len(XSTRING_BYTES)):
            with pytest.raises(MalformedClassfile):
                parse_classfile(XSTRING_BYTES[:size])

    def test_unknown_opcode(self):
        body = XSTRING_BYTES.index(bytes.fromhex("2bb6000a5703ac"))
        data = bytearray(XSTRING_BYTES)
        data[body + 4] = 0xFE
        with pytest.raises(MalformedClassfile, match="opcode"):
            parse_classfile(bytes(data))


class TestBuiltClassfiles:
    @pytest.mark.parametrize("fixture", ["motivating_example", "jdbc_rowset", "decoys"])
    def test_builder_round_trip(self, fixture):
        for model in load_ir(fixture):
            parsed = parse_classfile(build_classfile(model))
            assert parsed == model.with_source(ClassSource.CLASSFILE)

    def test_interface_calls_and_offsets(self):
        models = {m.name: m for m in dispatch_ladder(3)}
        entry = parse_classfile(build_classfile(models["ladder/Impl1"]))
        site = entry.methods[0].invoke_sites[0]
        assert site.kind is InvokeKind.INTERFACE
        assert site.target.owner == "ladder/Step2"

    def test_interface_flags(self):
        step = {m.name: m for m in dispatch_ladder(1)}["ladder/Step0"]
        parsed = parse_classfile(build_classfile(step))
        assert parsed.is_interface and parsed.is_abstract
        assert not parsed.methods[0].is_concrete

    def test_static_and_transient_fields(self):
        models = {m.name: m for m in load_ir("motivating_example")}
        parsed = parse_classfile(build_classfile(models["javax/swing/UIDefaults"]))
        cache = parsed.find_field("resourceCache")
        assert cache.is_transient and not cache.is_static


class TestModifiedUtf8:
    def test_embedded_nul(self):
        assert decode_modified_utf8(b"a\xc0\x80b") == "a\x00b"

    def test_supplementary_character_as_surrogate_pair(self):
        # U+1F600 as two 3-byte surrogate encodings
        assert decode_modified_utf8(b"\xed\xa0\xbd\xed\xb8\x80") == "\U0001F600"


@settings(max_examples=200, deadline=None)
@given(st.integers(0, len(XSTRING_BYTES) - 1), st.integers(1, 255))
def test_corrupted_bytes_fail_cleanly(position, flip):
    data = bytearray(XSTRING_BYTES)
    data[position] ^= flip
    try:
        parse_classfile(bytes(data))
    except (MalformedClassfile, UnsupportedVersion):
        pass


def test_constant_pool_index_out_of_range():
    data = bytearray(XSTRING_BYTES)
    struct.pack_into(">H", data, THIS_CLASS_AT, 40)
    with pytest.raises(MalformedClassfile, match="out of range") as ctx:
        parse_classfile(bytes(data))
    assert ctx.value.offset == THIS_CLASS_AT - 2


def test_ladder_round_trip():
    for model in dispatch_ladder(4, missing_field_at=1):
        assert parse_classfile(build_classfile(model)) == model.with_source(ClassSource.CLASSFILE)
