"""Fixed group parameters for the oblivious retrieval protocol: a
2048-bit prime field with a 256-bit prime-order subgroup.  Generated once
by scripts/gen_ot_group.py and shipped as a fixture."""

P_HEX = (
    "ca3ce421fe111b7a7fe0d747074a0845c86e46ebed5434e991ce94b3c21e87e6d61c02e2"
    "2fee1bd7719bbc364bbf22981b8e84b723bbd52a27afceb4940baa28b0764b12f5064ff3"
    "bb1a8ae80468c53369c2e40cd9df4176dc412f777cdd45c502a7262aeba2cb524251f39c"
    "e40dc20ea2d2aec6ea6072576c23f3f818ba8f2fd76007c00b04317a64c5c441eedf16fe"
    "84cbb0ef5cc0ac2824c779155e1c9160348aa5e6985711dad4a5798866e9793d2aa64972"
    "e18196a31dd51b752b962cfbd2c18a48cbcc6d6e8ad9d387322f40606534fe3a8bcfd6e5"
    "0f233dd59185c34430da67df7d5a7ac7cca3702871291ee517a070007b93dac3eb926aa2"
    "2e7a4735"
)

Q_HEX = (
    "f1d2f2bd870fbf4c91d66737fbec77628a33528c45ad50c6c212782fb13e29df"
)

G_HEX = (
    "bff65c63bd3dcd4bda2486bfa260f6828858349f5911e2ef6b4c7ec99f992f20f813751f"
    "db13ffdc083b3588f17c73a4109c45b646603e473d1ac260ded0419fefc4096044a7abb1"
    "b0b6e1fb076b61894d1de57ee098564c67a9fed8fc4b4f4ba31793b0f4a577dbd8ded43f"
    "09351503912fae6038b45f340a3404ac18f632e6b107dbf794de736941e35c5d9ec09578"
    "f9b5d9676bbbe870af13a2fd5597644d0f3bedb5e52d159b018b688ae879ff54175019f1"
    "67a3644d6763c74c361d518f4b525f2355be56dec49954aa5cc0d75c8f5f3f7f824118cc"
    "34480e4dc7d11a28f3f601701987cd3765576713ce2095cfe583e46615f430104e7b28a4"
    "148af497"
)

P = int(P_HEX, 16)
Q = int(Q_HEX, 16)
G = int(G_HEX, 16)
