"""Unit tests for JVM type descriptors."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.classmodel.descriptors import (
    TypeDescriptor,
    TypeKind,
    format_field_descriptor,
    format_method_descriptor,
    is_valid_internal_name,
    parse_field_descriptor,
    parse_method_descriptor,
    to_internal_name,
)
from src.common.errors import DescriptorError


class TestFieldDescriptors:
    def test_primitive(self):
        parsed = parse_field_descriptor("I")
        assert parsed.kind is TypeKind.PRIMITIVE
        assert parsed.primitive == "I"

    def test_class_type(self):
        parsed = parse_field_descriptor("Ljava/lang/String;")
        assert parsed.is_reference
        assert parsed.class_name == "java/lang/String"

    def test_multi_dimensional_array(self):
        parsed = parse_field_descriptor("[[Ljava/lang/Object;")
        assert parsed.is_array
        assert parsed.dims == 2
        assert parsed.element == TypeDescriptor.of_class("java/lang/Object")
        assert parsed.component() == parse_field_descriptor("[Ljava/lang/Object;")
        assert parsed.component().component().class_name == "java/lang/Object"

    def test_array_of_array_flattens(self):
        inner = TypeDescriptor.array_of(TypeDescriptor.of_primitive("B"))
        assert TypeDescriptor.array_of(inner).dims == 2

    @pytest.mark.parametrize(
        "text",
        ["", "X", "L;", "Ljava/lang/String", "Ljava//String;", "II", "[", "La.b;", "Q"],
    )
    def test_rejects_malformed(self, text):
        with pytest.raises(DescriptorError):
            parse_field_descriptor(text)

    def test_too_many_dimensions(self):
        with pytest.raises(DescriptorError, match="255"):
            parse_field_descriptor("[" * 256 + "I")
        assert parse_field_descriptor("[" * 255 + "I").dims == 255

    def test_component_of_non_array(self):
        with pytest.raises(ValueError):
            parse_field_descriptor("J").component()

    def test_str_is_descriptor_syntax(self):
        assert str(parse_field_descriptor("[Ljavax/swing/UIDefaults;")) == (
            "[Ljavax/swing/UIDefaults;"
        )


class TestMethodDescriptors:
    def test_void_no_params(self):
        parsed = parse_method_descriptor("()V")
        assert parsed.params == ()
        assert parsed.returns is None

    def test_params_and_return(self):
        parsed = parse_method_descriptor("(ILjava/lang/Object;[J)Z")
        assert [str(p) for p in parsed.params] == ["I", "Ljava/lang/Object;", "[J"]
        assert str(parsed.returns) == "Z"

    @pytest.mark.parametrize(
        "text", ["V", "(", "(I", "()", "()VV", "(V)V", "(I)ZZ", "()[V", "I)V"]
    )
    def test_rejects_malformed(self, text):
        with pytest.raises(DescriptorError):
            parse_method_descriptor(text)

    def test_format_round_trip(self):
        text = "(BCDFIJSZ[[Ljava/lang/String;)Ljava/lang/Object;"
        assert format_method_descriptor(parse_method_descriptor(text)) == text


class TestInternalNames:
    @pytest.mark.parametrize(
        "name,valid",
        [
            ("java/lang/String", True),
            ("Rdn$RdnEntry", True),
            ("", False),
            ("java.lang.String", False),
            ("java//String", False),
            ("/java", False),
            ("a;b", False),
            ("[I", False),
        ],
    )
    def test_validity(self, name, valid):
        assert is_valid_internal_name(name) is valid

    def test_dotted_to_internal(self):
        assert to_internal_name("javax.naming.ldap.Rdn") == "javax/naming/ldap/Rdn"
        assert to_internal_name("javax/naming") == "javax/naming"


_segments = st.text(alphabet="abcXYZ$_019", min_size=1, max_size=6)
_class_names = st.lists(_segments, min_size=1, max_size=4).map("/".join)
_base_types = st.one_of(
    st.sampled_from("BCDFIJSZ").map(TypeDescriptor.of_primitive),
    _class_names.map(TypeDescriptor.of_class),
)
_types = st.one_of(
    _base_types,
    st.tuples(_base_types, st.integers(1, 4)).map(lambda t: TypeDescriptor.array_of(*t)),
)


@given(_types)
def test_field_descriptor_format_parse_inverse(descriptor):
    assert parse_field_descriptor(format_field_descriptor(descriptor)) == descriptor
