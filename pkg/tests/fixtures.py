"""Hand-built records shared by the unit and acceptance tests."""

from wikibitext.corpus_io import DocumentRecord, Segment

AURELIA_EN = ("She teaches classics at the University of Bayonne; she was co-founder of the "
              "literary magazine and a new newspaper.")
AURELIA_ES = ("Enseña cultura clásica en la facultad de Bayona; fue cofundadora de una revista "
              "literaria y de un diario.")
CATRIONA_EN = (
    "In addition, she obtained a certificate in outdoor recreation and a black belt in "
    "Choi Kwang-Do martial arts.",
    "Catriona Elisa Magnayon Gray (born 6 January 1994) is a Filipino-Australian model, singer, "
    "and beauty pageant titleholder who was crowned Miss Universe 2018.",
    "Gray was born in Cairns, Queensland, to a Scottish-born father, Ian Gray, from Fraserburgh, "
    "and a Filipina mother, Normita Ragas Magnayon, from Albay.",
)

MAHREZ_EN = "Mahrez married his English girlfriend Rita Johal in 2015."
MAHREZ_ES = "Mahrez se casó con su novia inglesa en 2015 y tuvieron una hija ese mismo año."


def aurelia_record():
    return DocumentRecord(docid="Aurelia Arkotxa", wpid=51690640, language="en", topic="C6",
                          gender="Female", title="Aurelia Arkotxa",
                          segments=(Segment(1, AURELIA_EN),))


# Two English biographies in corpus format, without a <corpus> wrapper and
# with the closing tags and padded attribute values made well-formed.
TWO_DOC_EN_FILE = f"""<doc docid="Aurelia Arkotxa" wpid="51690640" language="en" topic="C6" gender="Female">
<title>Aurelia Arkotxa</title>
<seg id="1">{AURELIA_EN}</seg>
</doc>
<doc docid="Catriona Gray" wpid="51838666" language="en" topic="C2" gender="Female">
<title>Catriona Gray</title>
<seg id="1">{CATRIONA_EN[0]}</seg>
<seg id="2">{CATRIONA_EN[1]}</seg>
<seg id="3">{CATRIONA_EN[2]}</seg>
</doc>
""".encode("utf-8")
