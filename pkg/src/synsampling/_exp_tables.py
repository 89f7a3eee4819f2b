# Generated by synsampling.tablegen; do not edit.
TABLE_BITS = 40
INT_MIN = -16
INT_MAX = 11
FRAC_BITS = 9
POLY_BITS = 6
INT_TABLE = (
    123734,
    336343,
    914275,
    2485258,
    6755633,
    18363714,
    49917751,
    135690515,
    368845060,
    1002624824,
    2725416841,
    7408451073,
    20138257928,
    54741460583,
    148802717567,
    404487723188,
    1099511627776,
    2988782477963,
    8124353099063,
    22084281397169,
    60031300816501,
    163181994148252,
    443574649424905,
    1205760909096811,
    3277597968664119,
    8909434999213954,
    24218355260200318,
    65832315018968058,
)
FRAC_TABLE = (
    1099511627776,
    1101661209942,
    1103814994613,
    1105972990006,
    1108135204352,
    1110301645900,
    1112472322914,
    1114647243674,
    1116826416478,
    1119009849637,
    1121197551482,
    1123389530357,
    1125585794625,
    1127786352663,
    1129991212866,
    1132200383645,
    1134413873426,
    1136631690655,
    1138853843791,
    1141080341311,
    1143311191708,
    1145546403493,
    1147785985192,
    1150029945348,
    1152278292522,
    1154531035290,
    1156788182246,
    1159049742000,
    1161315723179,
    1163586134428,
    1165860984406,
    1168140281793,
    1170424035283,
    1172712253588,
    1175004945436,
    1177302119574,
    1179603784765,
    1181909949788,
    1184220623441,
    1186535814539,
    1188855531914,
    1191179784414,
    1193508580905,
    1195841930272,
    1198179841415,
    1200522323253,
    1202869384722,
    1205221034774,
    1207577282382,
    1209938136533,
    1212303606233,
    1214673700505,
    1217048428392,
    1219427798951,
    1221811821260,
    1224200504413,
    1226593857521,
    1228991889715,
    1231394610142,
    1233802027969,
    1236214152378,
    1238630992572,
    1241052557769,
    1243478857208,
    1245909900143,
    1248345695850,
    1250786253618,
    1253231582759,
    1255681692601,
    1258136592489,
    1260596291790,
    1263060799885,
    1265530126176,
    1268004280083,
    1270483271044,
    1272967108516,
    1275455801973,
    1277949360910,
    1280447794838,
    1282951113289,
    1285459325811,
    1287972441973,
    1290490471361,
    1293013423581,
    1295541308258,
    1298074135034,
    1300611913572,
    1303154653552,
    1305702364674,
    1308255056656,
    1310812739238,
    1313375422175,
    1315943115243,
    1318515828237,
    1321093570971,
    1323676353279,
    1326264185014,
    1328857076046,
    1331455036267,
    1334058075588,
    1336666203938,
    1339279431267,
    1341897767543,
    1344521222754,
    1347149806908,
    1349783530033,
    1352422402174,
    1355066433400,
    1357715633795,
    1360370013466,
    1363029582539,
    1365694351158,
    1368364329490,
    1371039527719,
    1373719956050,
    1376405624709,
    1379096543940,
    1381792724009,
    1384494175200,
    1387200907819,
    1389912932191,
    1392630258662,
    1395352897598,
    1398080859384,
    1400814154427,
    1403552793153,
    1406296786011,
    1409046143466,
    1411800876008,
    1414560994144,
    1417326508405,
    1420097429338,
    1422873767515,
    1425655533526,
    1428442737983,
    1431235391519,
    1434033504786,
    1436837088458,
    1439646153231,
    1442460709820,
    1445280768961,
    1448106341413,
    1450937437954,
    1453774069383,
    1456616246523,
    1459463980214,
    1462317281320,
    1465176160726,
    1468040629337,
    1470910698080,
    1473786377904,
    1476667679779,
    1479554614696,
    1482447193667,
    1485345427728,
    1488249327933,
    1491158905361,
    1494074171110,
    1496995136302,
    1499921812080,
    1502854209606,
    1505792340068,
    1508736214674,
    1511685844654,
    1514641241259,
    1517602415764,
    1520569379465,
    1523542143679,
    1526520719747,
    1529505119032,
    1532495352917,
    1535491432810,
    1538493370140,
    1541501176358,
    1544514862938,
    1547534441377,
    1550559923193,
    1553591319928,
    1556628643145,
    1559671904431,
    1562721115395,
    1565776287669,
    1568837432908,
    1571904562788,
    1574977689010,
    1578056823297,
    1581141977395,
    1584233163073,
    1587330392123,
    1590433676359,
    1593543027621,
    1596658457769,
    1599779978687,
    1602907602284,
    1606041340489,
    1609181205258,
    1612327208569,
    1615479362421,
    1618637678840,
    1621802169874,
    1624972847594,
    1628149724096,
    1631332811497,
    1634522121942,
    1637717667596,
    1640919460648,
    1644127513314,
    1647341837831,
    1650562446459,
    1653789351486,
    1657022565221,
    1660262099997,
    1663507968172,
    1666760182129,
    1670018754273,
    1673283697035,
    1676555022870,
    1679832744257,
    1683116873699,
    1686407423725,
    1689704406887,
    1693007835761,
    1696317722950,
    1699634081079,
    1702956922800,
    1706286260788,
    1709622107744,
    1712964476392,
    1716313379484,
    1719668829793,
    1723030840121,
    1726399423292,
    1729774592156,
    1733156359588,
    1736544738490,
    1739939741786,
    1743341382427,
    1746749673391,
    1750164627677,
    1753586258314,
    1757014578354,
    1760449600874,
    1763891338979,
    1767339805798,
    1770795014485,
    1774256978221,
    1777725710213,
    1781201223692,
    1784683531916,
    1788172648171,
    1791668585764,
    1795171358033,
    1798680978340,
    1802197460072,
    1805720816644,
    1809251061497,
    1812788208096,
    1816332269937,
    1819883260537,
    1823441193443,
    1827006082227,
    1830577940489,
    1834156781854,
    1837742619973,
    1841335468527,
    1844935341220,
    1848542251785,
    1852156213982,
    1855777241596,
    1859405348441,
    1863040548356,
    1866682855210,
    1870332282896,
    1873988845335,
    1877652556477,
    1881323430297,
    1885001480799,
    1888686722013,
    1892379167997,
    1896078832838,
    1899785730647,
    1903499875566,
    1907221281763,
    1910949963435,
    1914685934804,
    1918429210123,
    1922179803670,
    1925937729754,
    1929703002710,
    1933475636901,
    1937255646719,
    1941043046582,
    1944837850940,
    1948640074268,
    1952449731070,
    1956266835879,
    1960091403256,
    1963923447791,
    1967762984101,
    1971610026834,
    1975464590665,
    1979326690298,
    1983196340465,
    1987073555928,
    1990958351478,
    1994850741933,
    1998750742142,
    2002658366983,
    2006573631362,
    2010496550214,
    2014427138505,
    2018365411227,
    2022311383405,
    2026265070091,
    2030226486367,
    2034195647345,
    2038172568167,
    2042157264002,
    2046149750051,
    2050150041544,
    2054158153742,
    2058174101934,
    2062197901439,
    2066229567608,
    2070269115819,
    2074316561483,
    2078371920039,
    2082435206958,
    2086506437738,
    2090585627912,
    2094672793039,
    2098767948712,
    2102871110551,
    2106982294210,
    2111101515371,
    2115228789747,
    2119364133084,
    2123507561156,
    2127659089769,
    2131818734759,
    2135986511996,
    2140162437377,
    2144346526832,
    2148538796323,
    2152739261841,
    2156947939411,
    2161164845086,
    2165389994954,
    2169623405132,
    2173865091769,
    2178115071045,
    2182373359174,
    2186639972400,
    2190914926997,
    2195198239274,
    2199489925571,
    2203790002259,
    2208098485741,
    2212415392452,
    2216740738862,
    2221074541469,
    2225416816806,
    2229767581436,
    2234126851958,
    2238494645000,
    2242870977225,
    2247255865325,
    2251649326030,
    2256051376097,
    2260462032321,
    2264881311525,
    2269309230569,
    2273745806343,
    2278191055772,
    2282644995812,
    2287107643455,
    2291579015725,
    2296059129677,
    2300548002402,
    2305045651025,
    2309552092701,
    2314067344623,
    2318591424013,
    2323124348131,
    2327666134268,
    2332216799749,
    2336776361934,
    2341344838216,
    2345922246023,
    2350508602816,
    2355103926090,
    2359708233376,
    2364321542237,
    2368943870272,
    2373575235114,
    2378215654429,
    2382865145920,
    2387523727323,
    2392191416410,
    2396868230985,
    2401554188890,
    2406249307999,
    2410953606225,
    2415667101511,
    2420389811840,
    2425121755225,
    2429862949719,
    2434613413407,
    2439373164411,
    2444142220889,
    2448920601032,
    2453708323068,
    2458505405263,
    2463311865914,
    2468127723357,
    2472952995963,
    2477787702139,
    2482631860328,
    2487485489009,
    2492348606697,
    2497221231943,
    2502103383336,
    2506995079499,
    2511896339092,
    2516807180812,
    2521727623392,
    2526657685603,
    2531597386252,
    2536546744181,
    2541505778271,
    2546474507439,
    2551452950640,
    2556441126864,
    2561439055140,
    2566446754534,
    2571464244149,
    2576491543124,
    2581528670638,
    2586575645905,
    2591632488179,
    2596699216749,
    2601775850943,
    2606862410128,
    2611958913707,
    2617065381122,
    2622181831852,
    2627308285415,
    2632444761366,
    2637591279301,
    2642747858852,
    2647914519688,
    2653091281520,
    2658278164096,
    2663475187201,
    2668682370661,
    2673899734339,
    2679127298139,
    2684365082001,
    2689613105907,
    2694871389876,
    2700139953966,
    2705418818277,
    2710708002944,
    2716007528145,
    2721317414096,
    2726637681053,
    2731968349310,
    2737309439202,
    2742660971105,
    2748022965432,
    2753395442638,
    2758778423218,
    2764171927705,
    2769575976675,
    2774990590743,
    2780415790562,
    2785851596830,
    2791298030281,
    2796755111693,
    2802222861882,
    2807701301706,
    2813190452065,
    2818690333896,
    2824200968182,
    2829722375942,
    2835254578241,
    2840797596180,
    2846351450906,
    2851916163604,
    2857491755503,
    2863078247871,
    2868675662019,
    2874284019300,
    2879903341108,
    2885533648878,
    2891174964090,
    2896827308262,
    2902490702957,
    2908165169779,
    2913850730374,
    2919547406431,
    2925255219681,
    2930974191898,
    2936704344898,
    2942445700539,
    2948198280723,
    2953962107395,
    2959737202541,
    2965523588193,
    2971321286423,
    2977130319347,
    2982950709126,
)
POLY_COEFFS = (
    1099511627819,
    1099511234283,
    550292979829,
)
